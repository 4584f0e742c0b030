#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "mvboost/boosting.hpp"
#include "mvboost/csv.hpp"
#include "mvboost/data_io.hpp"
#include "mvboost/error.hpp"

namespace mvboost {

// Key-value run configuration, one `key = value` per line, '#' comments.
// Keys mirror HyperParams; anything else is rejected.
inline HyperParams parse_config(std::string_view text, HyperParams hp = {}) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::kInvalidConfig,
                  "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    auto number = [&]() {
      auto v = detail::parse_number(value);
      if (!v)
        throw Error(ErrorCode::kInvalidConfig,
                    "line " + std::to_string(line_no) + ": '" + key + "' needs a number");
      return *v;
    };
    auto count = [&]() -> std::uint64_t {
      const double v = number();
      if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
        throw Error(ErrorCode::kInvalidConfig,
                    "line " + std::to_string(line_no) + ": '" + key + "' needs a whole number");
      return static_cast<std::uint64_t>(v);
    };
    if (key == "n_trees") hp.n_trees = count();
    else if (key == "shrinkage") hp.shrinkage = number();
    else if (key == "max_depth") hp.max_depth = count();
    else if (key == "min_node_size") hp.min_node_size = count();
    else if (key == "subsample") hp.subsample = number();
    else if (key == "holdout_fraction") hp.holdout_fraction = number();
    else if (key == "seed") hp.seed = count();
    else
      throw Error(ErrorCode::kInvalidConfig,
                  "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  hp.validate();
  return hp;
}

inline HyperParams read_config(const std::filesystem::path& path) {
  return parse_config(csv::read_file(path));
}

inline std::string format_config(const HyperParams& hp) {
  return "n_trees = " + std::to_string(hp.n_trees) +
         "\nshrinkage = " + csv::format_double(hp.shrinkage) +
         "\nmax_depth = " + std::to_string(hp.max_depth) +
         "\nmin_node_size = " + std::to_string(hp.min_node_size) +
         "\nsubsample = " + csv::format_double(hp.subsample) +
         "\nholdout_fraction = " + csv::format_double(hp.holdout_fraction) +
         "\nseed = " + std::to_string(hp.seed) + "\n";
}

}  // namespace mvboost

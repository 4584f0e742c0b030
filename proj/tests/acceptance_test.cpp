// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. argv[1] is the path of the mvboost executable.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "mvboost/mvboost.hpp"
#include "test_support.hpp"

using namespace mvboost;
namespace fs = std::filesystem;
using test_util::read_text;
using test_util::TempDir;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Outcome split_oracle() {
  std::mt19937_64 rng(20240601);
  const auto start = std::chrono::steady_clock::now();
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto pr = test_util::random_problem(rng, 12, 3, 2);
    std::vector<std::size_t> rows(pr.x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto got = find_best_split(pr.x, pr.y, rows, pr.min_node_size);
    const auto want = test_util::brute_force_split(pr.x, pr.y, pr.min_node_size);
    const bool ok = got.has_value() == want.has_value() &&
                    (!got || (got->feature == want->feature &&
                              got->threshold == want->threshold &&
                              std::abs(got->total_gain - want->gain) <= 1e-9));
    if (!ok) ++mismatches;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 10.0,
          std::to_string(mismatches) + "/200 mismatches in " + num(secs) + " s"};
}

Outcome gain_telescoping() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto pr = test_util::random_problem(rng, 60, 4, 3);
    const Tree tree = fit_tree(pr.x, pr.y, TreeParams{4, pr.min_node_size});
    std::vector<std::size_t> all(pr.x.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::vector<std::size_t>> leaf_rows(tree.nodes().size());
    for (auto r : all) leaf_rows[tree.leaf_index(pr.x.row(r))].push_back(r);
    double leaf_sse = 0.0, gains = 0.0;
    for (const auto& rows : leaf_rows) leaf_sse += test_util::total_sse(pr.y, rows);
    for (const auto& node : tree.nodes())
      if (node.split) gains += node.split->total_gain;
    const double root = test_util::total_sse(pr.y, all);
    worst = std::max(worst, std::abs(gains - (root - leaf_sse)) / std::max(root, 1e-300));
  }
  return {worst <= 1e-6, "max relative error " + num(worst)};
}

Outcome monotone_descent() {
  const auto d = generate_synthetic({.n = 500, .seed = 7, .noise_corr = 0.8});
  HyperParams hp;
  hp.subsample = 1.0;
  hp.n_trees = 500;
  const auto res = fit(d, hp);
  const auto& tr = res.trace.train_mse;
  std::size_t violations = 0;
  double prev = res.trace.baseline_train_mse;
  for (double v : tr) {
    if (v > prev + 1e-12) ++violations;
    prev = v;
  }
  return {tr.size() == 500 && violations == 0,
          std::to_string(violations) + " increases over " + std::to_string(tr.size()) +
              " iterations, final " + num(tr.empty() ? NAN : tr.back())};
}

Outcome covariance_telescoping() {
  const auto d = generate_synthetic({.n = 500, .seed = 7, .noise_corr = 0.8});
  const auto res = fit(d, HyperParams{});
  const auto& model = res.model;
  const auto& trace = res.trace;
  const std::size_t q = model.n_responses();
  const auto [ystd, params] = standardize_responses(d);
  const auto& rows = trace.train_rows;

  // Independent recomputation of the residual covariance at a given prefix.
  const auto residual_cov = [&](std::size_t m) {
    const Matrix f = predict_standardized(model, ystd.features, m);
    Matrix r(ystd.responses.rows(), q);
    for (std::size_t i = 0; i < r.rows(); ++i)
      for (std::size_t k = 0; k < q; ++k) r(i, k) = ystd.responses(i, k) - f(i, k);
    return sample_covariance(r, rows);
  };
  const Matrix c0 = residual_cov(0);
  const std::size_t total_m = trace.residual_cov.size() - 1;
  const Matrix c_end = residual_cov(total_m);
  double worst_delta = 0.0;
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      double sum = 0.0;
      for (std::size_t m = 1; m <= total_m; ++m)
        sum += trace.residual_cov[m - 1](i, j) - trace.residual_cov[m](i, j);
      worst_delta = std::max(worst_delta, std::abs(sum - (c0(i, j) - c_end(i, j))));
    }

  const auto tensor = covariance_explained(model, trace);
  const Matrix c_best = residual_cov(model.best_iteration);
  double worst_pair = 0.0;
  for (std::size_t p = 0; p < tensor.pair_index.size(); ++p) {
    const auto [i, j] = tensor.pair_index[p];
    double sum = 0.0;
    for (std::size_t k = 0; k < tensor.values.rows(); ++k) sum += tensor.values(k, p);
    worst_pair = std::max(worst_pair, std::abs(sum - (c0(i, j) - c_best(i, j))));
  }
  return {worst_delta <= 1e-8 && worst_pair <= 1e-6,
          "telescoping error " + num(worst_delta) + ", pair-sum error " + num(worst_pair)};
}

Outcome influence_normalization() {
  std::vector<BoostedModel> corpus;
  for (std::uint64_t s = 0; s < 4; ++s) {
    HyperParams hp;
    hp.n_trees = 200;
    hp.seed = s;
    corpus.push_back(
        fit(generate_synthetic({.n = 200 + 100 * s, .seed = s, .noise_corr = 0.3 * s}), hp).model);
  }
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto pr = test_util::random_problem(rng, 60, 4, 3);
    if (pr.x.rows() < 10) continue;
    HyperParams hp;
    hp.n_trees = 40;
    hp.min_node_size = pr.min_node_size;
    hp.holdout_fraction = 0.0;
    try {
      corpus.push_back(fit(make_numeric_dataset(pr.x, pr.y), hp).model);
    } catch (const Error&) {
    }
  }
  std::size_t columns = 0;
  double worst = 0.0;
  for (const auto& model : corpus) {
    const auto infl = relative_influence(model);
    for (std::size_t q = 0; q < infl.values.cols(); ++q) {
      double sum = 0.0;
      for (std::size_t k = 0; k < infl.values.rows(); ++k) sum += infl.values(k, q);
      if (sum == 0.0) continue;
      ++columns;
      worst = std::max(worst, std::abs(sum - 100.0));
    }
  }
  return {columns > 0 && worst <= 1e-6, std::to_string(corpus.size()) + " models, " +
                                            std::to_string(columns) +
                                            " nonzero columns, max deviation " + num(worst)};
}

Outcome signal_recovery() {
  const auto d = generate_synthetic({.n = 500, .seed = 7, .noise_corr = 0.8});
  const auto res = fit(d, HyperParams{});
  const auto ranking = global_importance(relative_influence(res.model));
  double noise = 0.0;
  for (const auto& e : ranking)
    if (e.feature == "x4" || e.feature == "x5") noise += e.score;
  const auto tensor = covariance_explained(res.model, res.trace);
  std::size_t pair = 0;
  while (pair < tensor.pair_index.size() && tensor.pair_index[pair] != std::pair<std::size_t, std::size_t>{0, 1})
    ++pair;
  const auto row_of = [&](const std::string& f) {
    return static_cast<std::size_t>(
        std::find(tensor.feature_names.begin(), tensor.feature_names.end(), f) -
        tensor.feature_names.begin());
  };
  const double x1 = tensor.values(row_of("x1"), pair);
  const double x4 = tensor.values(row_of("x4"), pair);
  const double x5 = tensor.values(row_of("x5"), pair);
  const bool pass = ranking.front().feature == "x1" && noise < 5.0 && x1 > x4 && x1 > x5;
  return {pass, "top " + ranking.front().feature + ", x4+x5 " + num(noise) +
                    "%, cov(y1,y2) x1 " + num(x1) + " vs x4 " + num(x4) + " x5 " + num(x5)};
}

Outcome borrowed_strength() {
  const fs::path dir = MVBOOST_FIXTURE_DIR;
  const auto d = load_csv((dir / "weak_y2.csv").string(), read_schema((dir / "weak_y2.schema.csv").string()));
  const auto c = compare_models(d, HyperParams{}, 100);
  const auto& y1 = c.rows[0];
  const auto& y2 = c.rows[1];
  const bool pass = y2.r2_multi >= y2.r2_uni - 0.02 && y1.r2_multi >= y1.r2_uni - 0.05;
  return {pass, "y2 multi " + num(y2.r2_multi) + " uni " + num(y2.r2_uni) + "; y1 multi " +
                    num(y1.r2_multi) + " uni " + num(y1.r2_uni)};
}

Outcome single_response_degeneracy() {
  const auto full = generate_synthetic({.n = 300, .seed = 21, .noise_corr = 0.5});
  std::size_t failures = 0;
  for (std::size_t q = 0; q < 2; ++q) {
    HyperParams hp;
    hp.n_trees = 300;
    // Univariate path: the per-response projection used by the comparison harness.
    const auto uni = fit(select_response(full, q), hp);
    // Multivariate path on data that simply has one response column.
    Matrix y(full.n_rows(), 1);
    for (std::size_t i = 0; i < full.n_rows(); ++i) y(i, 0) = full.responses(i, q);
    const auto multi = fit(make_numeric_dataset(full.features, y, full.feature_names,
                                                {full.response_names[q]}),
                           hp);
    const bool models = multi.model.trees == uni.model.trees &&
                        multi.model.init == uni.model.init &&
                        multi.model.best_iteration == uni.model.best_iteration &&
                        multi.model.standardization == uni.model.standardization;
    const bool preds = predict(multi.model, full.features) == predict(uni.model, full.features);
    const bool infl = relative_influence(multi.model).values == relative_influence(uni.model).values &&
                      covariance_explained(multi.model, multi.trace).values ==
                          covariance_explained(uni.model, uni.trace).values;
    const auto cmp = compare_models(make_numeric_dataset(full.features, y), hp, 8);
    const bool harness = cmp.rows[0].r2_multi == cmp.rows[0].r2_uni &&
                         cmp.rows[0].mse_multi == cmp.rows[0].mse_uni;
    if (!(models && preds && infl && harness)) ++failures;
  }
  return {failures == 0, std::to_string(failures) + "/2 responses differ"};
}

Outcome clustering_oracle() {
  // Points 0, 1, 10, 11 on a line: {0,1} and {10,11} merge at 1, then at 11.
  DistanceMatrix line{{"p0", "p1", "p10", "p11"}, Matrix(4, 4)};
  const double pos[] = {0, 1, 10, 11};
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) line.values(a, b) = std::abs(pos[a] - pos[b]);
  const auto dg = hierarchical_cluster(line);
  const std::vector<Merge> expected{{0, 1, 1.0}, {2, 3, 1.0}, {4, 5, 11.0}};
  bool pass = dg.merges == expected;

  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> k_dist(2, 12);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t bad = 0;
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = k_dist(rng);
    Matrix pts(k, 3);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        pts(i, j) = t % 2 ? std::floor(4.0 * unif(rng)) : unif(rng);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < k; ++i) labels.push_back("i" + std::to_string(i));
    const auto dm = manhattan_distances(pts, labels);
    for (auto link : {Linkage::kComplete, Linkage::kSingle, Linkage::kAverage}) {
      const auto g = hierarchical_cluster(dm, link);
      for (std::size_t m = 1; m < g.merges.size(); ++m)
        if (g.merges[m].height < g.merges[m - 1].height) {
          ++bad;
          break;
        }
    }
  }
  pass = pass && bad == 0;
  return {pass, std::string(dg.merges == expected ? "line example exact" : "line example wrong") +
                    ", " + std::to_string(bad) + " non-monotone random dendrograms"};
}

int sh(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

bool cli_pipeline(const std::string& bin, const fs::path& dir) {
  const auto p = [&](const char* f) { return q(dir / f); };
  const std::string b = q(bin);
  return sh(b + " synth --n 500 --seed 7 --noise-corr 0.8 --out " + p("data.csv") +
            " --schema-out " + p("schema.csv")) == 0 &&
         sh(b + " train --data " + p("data.csv") + " --schema " + p("schema.csv") +
            " --out-model " + p("model.json") + " --trace-out " + p("trace.csv")) == 0 &&
         sh(b + " predict --model " + p("model.json") + " --data " + p("data.csv") + " --out " +
            p("pred.csv")) == 0 &&
         sh(b + " importance --model " + p("model.json") + " --trace " + p("trace.csv") +
            " --out " + p("imp")) == 0 &&
         sh(b + " cluster --model " + p("model.json") + " --trace " + p("trace.csv") +
            " --target predictors --out " + p("pred_clu")) == 0 &&
         sh(b + " cluster --model " + p("model.json") + " --trace " + p("trace.csv") +
            " --target response-pairs --out " + p("pair_clu")) == 0 &&
         sh(b + " evaluate --data " + p("data.csv") + " --schema " + p("schema.csv") +
            " --split-seed 3 --out " + p("eval.csv")) == 0 &&
         sh(b + " scenario --model " + p("model.json") + " --data " + p("data.csv") +
            " --set x1=0.9 --set x4=0.1 --out " + p("scenario.csv")) == 0;
}

Outcome determinism(const std::string& bin) {
  TempDir a, b;
  if (!cli_pipeline(bin, a.path()) || !cli_pipeline(bin, b.path()))
    return {false, "CLI pipeline failed to run"};
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(a.path())) {
    ++files;
    const auto other = b.path() / entry.path().filename();
    if (!fs::exists(other) || read_text(entry.path()) != read_text(other)) ++differing;
  }
  const auto data = load_csv((a.path() / "data.csv").string(),
                             read_schema((a.path() / "schema.csv").string()));
  const auto model = load_model(a.path() / "model.json");
  const fs::path copy = a.path() / "copy.json";
  save_model(model, copy);
  const auto reloaded = load_model(copy);
  const bool round_trip = reloaded == model &&
                          predict(reloaded, data.features) == predict(model, data.features) &&
                          read_text(copy) == read_text(a.path() / "model.json");
  return {files >= 15 && differing == 0 && round_trip,
          std::to_string(files) + " files, " + std::to_string(differing) + " differ, round-trip " +
              (round_trip ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance_test <path-to-mvboost>\n";
    return 2;
  }
  const std::string bin = argv[1];
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 split oracle equivalence", split_oracle},
      {"2 gain telescoping", gain_telescoping},
      {"3 monotone training descent", monotone_descent},
      {"4 covariance telescoping", covariance_telescoping},
      {"5 influence normalization", influence_normalization},
      {"6 signal recovery", signal_recovery},
      {"7 borrowed strength", borrowed_strength},
      {"8 single-response degeneracy", single_response_degeneracy},
      {"9 clustering oracle", clustering_oracle},
      {"10 determinism and round-trip", [&] { return determinism(bin); }},
  };
  const auto start = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail << std::endl;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (10 - failed) << "/10 criteria passed in " << num(secs) << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}

#pragma once

#include "mvboost/boosting.hpp"
#include "mvboost/config.hpp"
#include "mvboost/csv.hpp"
#include "mvboost/data_io.hpp"
#include "mvboost/error.hpp"
#include "mvboost/evaluation.hpp"
#include "mvboost/influence.hpp"
#include "mvboost/matrix.hpp"
#include "mvboost/model_io.hpp"
#include "mvboost/tree.hpp"

#pragma once

#include "postval/aggregation.hpp"
#include "postval/assignment.hpp"
#include "postval/clustering.hpp"
#include "postval/config.hpp"
#include "postval/core.hpp"
#include "postval/dataset.hpp"
#include "postval/detection_metrics.hpp"
#include "postval/distribution_metrics.hpp"
#include "postval/localization.hpp"
#include "postval/pipeline.hpp"
#include "postval/random.hpp"
#include "postval/recommender.hpp"
#include "postval/report.hpp"
#include "postval/toybench.hpp"

#pragma once

#include "plagdet/types.hpp"
#include "plagdet/embedding_store.hpp"
#include "plagdet/retrieval.hpp"
#include "plagdet/metric_learning.hpp"
#include "plagdet/classifier.hpp"
#include "plagdet/evaluation.hpp"
#include "plagdet/synthetic.hpp"
#include "plagdet/pipeline.hpp"

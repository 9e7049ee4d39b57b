#pragma once

// Umbrella header for the uncertainty-guided class-imbalance learning
// library: multi-view temporal graph encoding, evidential classification
// with Dempster-Shafer fusion, and margin contrastive boundary learning.

#include "ucil/adam.hpp"
#include "ucil/binding.hpp"
#include "ucil/checkpoint.hpp"
#include "ucil/config.hpp"
#include "ucil/contrastive.hpp"
#include "ucil/dataset.hpp"
#include "ucil/edl.hpp"
#include "ucil/export.hpp"
#include "ucil/grad_check.hpp"
#include "ucil/gradcheck_suite.hpp"
#include "ucil/inference.hpp"
#include "ucil/matrix.hpp"
#include "ucil/metrics.hpp"
#include "ucil/model.hpp"
#include "ucil/opinion.hpp"
#include "ucil/prototypes.hpp"
#include "ucil/records.hpp"
#include "ucil/special.hpp"
#include "ucil/synthetic.hpp"
#include "ucil/tape.hpp"
#include "ucil/temporal_gnn.hpp"
#include "ucil/train.hpp"
#include "ucil/view_graph.hpp"

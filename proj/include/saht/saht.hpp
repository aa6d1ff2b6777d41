#pragma once

#include "saht/bounds.hpp"
#include "saht/core.hpp"
#include "saht/envs/collect.hpp"
#include "saht/envs/registry.hpp"
#include "saht/envs/tabular.hpp"
#include "saht/harness/aggregate.hpp"
#include "saht/io.hpp"
#include "saht/model.hpp"
#include "saht/ope.hpp"
#include "saht/seldonian.hpp"
#include "saht/stats.hpp"

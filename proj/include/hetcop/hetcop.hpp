#pragma once

#include "hetcop/benchmark.hpp"
#include "hetcop/bootstrap.hpp"
#include "hetcop/data_model.hpp"
#include "hetcop/em.hpp"
#include "hetcop/error.hpp"
#include "hetcop/estep.hpp"
#include "hetcop/evalmetrics.hpp"
#include "hetcop/fused_glasso.hpp"
#include "hetcop/graph.hpp"
#include "hetcop/io.hpp"
#include "hetcop/marginals.hpp"
#include "hetcop/normal.hpp"
#include "hetcop/parallel.hpp"
#include "hetcop/rng.hpp"
#include "hetcop/simgen.hpp"
#include "hetcop/truncnorm.hpp"

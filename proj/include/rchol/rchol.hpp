#pragma once

#include "rchol/classify.hpp"
#include "rchol/elim_graph.hpp"
#include "rchol/error.hpp"
#include "rchol/factorization.hpp"
#include "rchol/io.hpp"
#include "rchol/krylov.hpp"
#include "rchol/ordering.hpp"
#include "rchol/parallel.hpp"
#include "rchol/problems.hpp"
#include "rchol/rng.hpp"
#include "rchol/sampling.hpp"
#include "rchol/sparse.hpp"

#pragma once

#include "dataset.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "frailty.hpp"
#include "gd.hpp"
#include "inference.hpp"
#include "ising.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "sgd.hpp"
#include "types.hpp"

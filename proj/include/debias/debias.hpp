#pragma once

#include "debias/config.hpp"
#include "debias/corpus.hpp"
#include "debias/errors.hpp"
#include "debias/evaluation.hpp"
#include "debias/gradcheck.hpp"
#include "debias/model.hpp"
#include "debias/network.hpp"
#include "debias/projection.hpp"
#include "debias/serialize.hpp"
#include "debias/synthetic.hpp"
#include "debias/tagset.hpp"
#include "debias/training.hpp"

#pragma once

#include "psnn/adversary.hpp"
#include "psnn/basis.hpp"
#include "psnn/checkpoint.hpp"
#include "psnn/dataset.hpp"
#include "psnn/decoding.hpp"
#include "psnn/encoding.hpp"
#include "psnn/model.hpp"
#include "psnn/robust_training.hpp"
#include "psnn/spike_train.hpp"
#include "psnn/training.hpp"

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "iwsft/curation.hpp"
#include "iwsft/envs.hpp"
#include "iwsft/io.hpp"
#include "iwsft/objectives.hpp"
#include "iwsft/optimizer.hpp"
#include "iwsft/policy.hpp"
#include "iwsft/rng.hpp"
#include "iwsft/schedule.hpp"
#include "iwsft/trainer.hpp"
#include "iwsft/types.hpp"

#pragma once

#include "vmig/error.hpp"
#include "vmig/sim/action.hpp"
#include "vmig/sim/channel.hpp"
#include "vmig/sim/environment.hpp"
#include "vmig/sim/latency.hpp"
#include "vmig/sim/world_config.hpp"
#include "vmig/trust/beacon.hpp"
#include "vmig/trust/config.hpp"
#include "vmig/trust/ledger.hpp"
#include "vmig/trust/reputation.hpp"
#include "vmig/nn/adam.hpp"
#include "vmig/nn/checkpoint.hpp"
#include "vmig/nn/dense_net.hpp"
#include "vmig/nn/grad_check.hpp"
#include "vmig/diffusion/policy.hpp"
#include "vmig/diffusion/schedule.hpp"
#include "vmig/learner/config.hpp"
#include "vmig/learner/objectives.hpp"
#include "vmig/learner/replay_buffer.hpp"
#include "vmig/learner/trainer.hpp"
#include "vmig/harness/config_file.hpp"
#include "vmig/harness/experiment.hpp"
#include "vmig/harness/experiment_config.hpp"
#include "vmig/harness/metrics.hpp"

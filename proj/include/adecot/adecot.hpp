#pragma once

#include "adecot/core.hpp"
#include "adecot/harness.hpp"
#include "adecot/metrics.hpp"
#include "adecot/providers.hpp"
#include "adecot/remote.hpp"
#include "adecot/rng.hpp"
#include "adecot/sampler.hpp"
#include "adecot/sim.hpp"
#include "adecot/sim_server.hpp"
#include "adecot/strategies.hpp"
#include "adecot/studies.hpp"
#include "adecot/trace.hpp"
#include "adecot/verifiers.hpp"

#pragma once

#include "mecshield/agent.hpp"
#include "mecshield/config.hpp"
#include "mecshield/controller.hpp"
#include "mecshield/dataset.hpp"
#include "mecshield/digest.hpp"
#include "mecshield/errors.hpp"
#include "mecshield/event_log_io.hpp"
#include "mecshield/features.hpp"
#include "mecshield/messages.hpp"
#include "mecshield/outputs.hpp"
#include "mecshield/random.hpp"
#include "mecshield/sim.hpp"
#include "mecshield/som.hpp"
#include "mecshield/traffic.hpp"
#include "mecshield/types.hpp"

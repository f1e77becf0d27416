#pragma once

#include "aging.hpp"
#include "bank.hpp"
#include "common.hpp"
#include "config.hpp"
#include "controller.hpp"
#include "engine.hpp"
#include "timing.hpp"
#include "workload.hpp"

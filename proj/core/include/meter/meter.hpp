#pragma once

// Everything a front end needs.
#include "meter/config.hpp"
#include "meter/data.hpp"
#include "meter/engine.hpp"
#include "meter/error.hpp"
#include "meter/eval.hpp"
#include "meter/serialize.hpp"

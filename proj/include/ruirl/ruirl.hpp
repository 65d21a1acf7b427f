// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include "ruirl/baselines.hpp"
#include "ruirl/csv.hpp"
#include "ruirl/eval.hpp"
#include "ruirl/generative.hpp"
#include "ruirl/inference.hpp"
#include "ruirl/network.hpp"
#include "ruirl/plot.hpp"
#include "ruirl/predict.hpp"
#include "ruirl/random.hpp"
#include "ruirl/rucore.hpp"
#include "ruirl/synth.hpp"
#include "ruirl/trajectory.hpp"
#include "ruirl/types.hpp"

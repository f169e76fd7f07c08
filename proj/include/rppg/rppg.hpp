#pragma once

#include "rppg/error.hpp"
#include "rppg/eval.hpp"
#include "rppg/frame_io.hpp"
#include "rppg/pipeline.hpp"
#include "rppg/pulse_signal.hpp"
#include "rppg/roi.hpp"
#include "rppg/spectral.hpp"
#include "rppg/synth.hpp"

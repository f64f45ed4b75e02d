#pragma once

#include "vaclass/audio_io.hpp"
#include "vaclass/classify.hpp"
#include "vaclass/commands.hpp"
#include "vaclass/config.hpp"
#include "vaclass/dsp.hpp"
#include "vaclass/error.hpp"
#include "vaclass/eval.hpp"
#include "vaclass/features.hpp"
#include "vaclass/format.hpp"
#include "vaclass/parallel.hpp"
#include "vaclass/random.hpp"
#include "vaclass/synth.hpp"
#include "vaclass/version.hpp"

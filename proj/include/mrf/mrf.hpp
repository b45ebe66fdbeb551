#pragma once

#include "mrf/commands.hpp"
#include "mrf/config.hpp"
#include "mrf/core.hpp"
#include "mrf/csrecon.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/eval.hpp"
#include "mrf/experiment.hpp"
#include "mrf/io.hpp"
#include "mrf/kspace.hpp"
#include "mrf/matching.hpp"
#include "mrf/metric.hpp"
#include "mrf/parallel.hpp"
#include "mrf/phantom.hpp"
#include "mrf/pipeline.hpp"
#include "mrf/sampling.hpp"
#include "mrf/sequence.hpp"
#include "mrf/study.hpp"
#include "mrf/wavelet.hpp"

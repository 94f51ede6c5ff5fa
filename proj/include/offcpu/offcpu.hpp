#pragma once

// Everything in one include.
#include "offcpu/error.hpp"
#include "offcpu/rng.hpp"
#include "offcpu/trace/event.hpp"
#include "offcpu/trace/io.hpp"
#include "offcpu/trace/spans.hpp"
#include "offcpu/state/value.hpp"
#include "offcpu/state/database.hpp"
#include "offcpu/state/builder.hpp"
#include "offcpu/state/snapshot.hpp"
#include "offcpu/graph/depgraph.hpp"
#include "offcpu/graph/builder.hpp"
#include "offcpu/graph/export.hpp"
#include "offcpu/analysis/features.hpp"
#include "offcpu/analysis/kmeans.hpp"
#include "offcpu/analysis/representative.hpp"
#include "offcpu/analysis/compare.hpp"
#include "offcpu/analysis/report.hpp"
#include "offcpu/synth/generate.hpp"

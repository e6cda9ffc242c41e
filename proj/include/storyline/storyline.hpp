#pragma once

#include "storyline/alignment.hpp"
#include "storyline/bloom.hpp"
#include "storyline/engine.hpp"
#include "storyline/error.hpp"
#include "storyline/evaluate.hpp"
#include "storyline/generate.hpp"
#include "storyline/index.hpp"
#include "storyline/io.hpp"
#include "storyline/model.hpp"
#include "storyline/replay.hpp"
#include "storyline/similarity.hpp"
#include "storyline/srg.hpp"
#include "storyline/worker_pool.hpp"

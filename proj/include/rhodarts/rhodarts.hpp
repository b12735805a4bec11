// rhodarts.hpp
// Umbrella header.

#pragma once

#include "rhodarts/densmat.hpp"
#include "rhodarts/difftape.hpp"
#include "rhodarts/export.hpp"
#include "rhodarts/gateset.hpp"
#include "rhodarts/qdarts.hpp"
#include "rhodarts/regopt.hpp"
#include "rhodarts/rng.hpp"
#include "rhodarts/search.hpp"
#include "rhodarts/searchspace.hpp"
#include "rhodarts/tasks/classify.hpp"
#include "rhodarts/tasks/maxcut.hpp"
#include "rhodarts/tasks/state_init.hpp"

#pragma once

// Everything at once.

#include "cwkb/error.hpp"
#include "cwkb/expr.hpp"
#include "cwkb/frame.hpp"
#include "cwkb/model_io.hpp"
#include "cwkb/modes.hpp"
#include "cwkb/packet.hpp"
#include "cwkb/scatter.hpp"
#include "cwkb/sweep.hpp"
#include "cwkb/symbol.hpp"
#include "cwkb/validate.hpp"

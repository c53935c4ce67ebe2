#pragma once

#include "qvfgm/common.hpp"
#include "qvfgm/diagnostics.hpp"
#include "qvfgm/family.hpp"
#include "qvfgm/gsst.hpp"
#include "qvfgm/inference.hpp"
#include "qvfgm/io.hpp"
#include "qvfgm/model.hpp"
#include "qvfgm/verify.hpp"

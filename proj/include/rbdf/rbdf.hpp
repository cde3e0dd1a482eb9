#pragma once

#include "bilinear_forms.hpp"
#include "determining.hpp"
#include "error.hpp"
#include "interpolants.hpp"
#include "io.hpp"
#include "nudging.hpp"
#include "param_audit.hpp"
#include "rb_solver.hpp"
#include "selftest.hpp"
#include "spectral_core.hpp"

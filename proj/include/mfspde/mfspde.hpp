#pragma once

#include "mfspde/errors.hpp"
#include "mfspde/spectral_space.hpp"
#include "mfspde/noise.hpp"
#include "mfspde/coefficients.hpp"
#include "mfspde/problem.hpp"
#include "mfspde/parallel.hpp"
#include "mfspde/moving_frame.hpp"
#include "mfspde/schemes/signature.hpp"
#include "mfspde/schemes/cubature_formula.hpp"
#include "mfspde/schemes/euler_split.hpp"
#include "mfspde/schemes/cubature_scheme.hpp"
#include "mfspde/picard.hpp"
#include "mfspde/analysis/ou_oracle.hpp"
#include "mfspde/analysis/kolmogorov.hpp"
#include "mfspde/analysis/order.hpp"
#include "mfspde/analysis/stability.hpp"
#include "mfspde/analysis/residuals.hpp"

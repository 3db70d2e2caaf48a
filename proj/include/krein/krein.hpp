#pragma once

#include <krein/bernstein.hpp>
#include <krein/calculus.hpp>
#include <krein/error.hpp>
#include <krein/montecarlo.hpp>
#include <krein/operator.hpp>
#include <krein/quadrature.hpp>
#include <krein/random.hpp>
#include <krein/spectral.hpp>
#include <krein/stability.hpp>
#include <krein/strings.hpp>
#include <krein/version.hpp>

#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include "permclt/matrix_core.hpp"

namespace permclt {

// h_{eps,p}(y) = (int_0^1 (eps^2 + y(t)^2)^{p/2} dt)^{1/p}, integrated exactly over
// the constancy intervals of a step path.
double h_eps_p(const StepPath& y, double eps, double p);

// Nonincreasing C^3 cutoff: 1 on (-inf, 0], 0 on [1, inf),
// 1 - (35x^4 - 84x^5 + 70x^6 - 20x^7) in between.
double phi_cutoff(double x) noexcept;
double phi_rho_eta(double x, double rho, double eta);

// Smooth surrogate for the indicator of a ball around `center`:
// w -> phi_{rho,eta}(h_{eps,p}(w - center)). A center with n == 0 is the zero path.
struct BallFunctional {
    double eps = 1.0;
    double p = 2.0;
    double rho = 1.0;
    double eta = 1.0;
    StepPath center;
};

void validate(const BallFunctional& g);
double ball(const BallFunctional& g, const StepPath& w);
// p^2 eps^-2 eta^-3: the analytic scale of the functional's smoothness norm.
double norm_scale(const BallFunctional& g);

struct PointEval {
    double t = 1.0;
};

// int_0^1 w(t) dt.
struct PathIntegral {};

using Functional = std::variant<BallFunctional, PointEval, PathIntegral>;

//   ball:eps=..:p=..:rho=..:eta=..[:center=zero|file.csv]
//   eval:t=..
//   integral
Functional parse_functional(std::string_view spec);
std::string describe(const Functional& f);
double evaluate(const Functional& f, const StepPath& w);

}  // namespace permclt

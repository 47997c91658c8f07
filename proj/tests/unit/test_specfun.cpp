#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hb/specfun.hpp"

using namespace hb::specfun;
using std::numbers::pi;

namespace {

const Order kAll[] = {Order::Zero, Order::Half, Order::One, Order::ThreeHalves};

Order next_order(Order nu) {
  switch (nu) {
    case Order::Zero: return Order::One;
    case Order::Half: return Order::ThreeHalves;
    default: throw std::logic_error("no successor in scope");
  }
}

}  // namespace

TEST_CASE("half-order closed forms") {
  CHECK(std::abs(bessel_j(Order::Half, pi)) < 1e-15);
  CHECK(bessel_j(Order::Half, pi / 2) == doctest::Approx(2.0 / pi).epsilon(1e-14));
  CHECK(std::abs(bessel_y(Order::Half, pi / 2)) < 1e-15);
  // oracle: -sqrt(2/(pi*pi)) cos(pi), frozen
  CHECK(bessel_y(Order::Half, pi) == doctest::Approx(0.4501581580785531).epsilon(1e-14));
}

TEST_CASE("J0 near its first zero") {
  CHECK(std::abs(bessel_j(Order::Zero, 2.404826)) < 1e-6);
}

TEST_CASE("agreement with the standard library on (0, 50]") {
  for (Order nu : kAll) {
    const double v = order_value(nu);
    for (int i = 1; i <= 2000; ++i) {
      const double t = 0.025 * i;
      CHECK(bessel_j(nu, t) == doctest::Approx(std::cyl_bessel_j(v, t)).epsilon(1e-10).scale(1.0));
      CHECK(bessel_y(nu, t) == doctest::Approx(std::cyl_neumann(v, t)).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("derivatives") {
  // J0'(1) = -J1(1); oracle value from std::cyl_bessel_j(1, 1), frozen
  CHECK(bessel_derivatives(Order::Zero, 1.0).dj == doctest::Approx(-0.44005058574493355).epsilon(1e-13));
  CHECK(std::cyl_bessel_j(1.0, 1.0) == doctest::Approx(0.44005058574493355).epsilon(1e-14));

  // closed-form differentiation of sqrt(2/(pi t)) sin t at pi/2
  const double t = pi / 2;
  const double dj = std::sqrt(2.0 / pi) * (std::cos(t) / std::sqrt(t) - 0.5 * std::sin(t) / std::pow(t, 1.5));
  const double dy = std::sqrt(2.0 / pi) * (std::sin(t) / std::sqrt(t) + 0.5 * std::cos(t) / std::pow(t, 1.5));
  CHECK(std::abs(bessel_derivatives(Order::Half, t).dj - dj) < 1e-12);
  CHECK(std::abs(bessel_derivatives(Order::Half, t).dy - dy) < 1e-12);
}

TEST_CASE("Wronskian and cross-product identities on [0.1, 20]") {
  double worst_w = 0.0, worst_c = 0.0;
  for (Order nu : kAll) {
    for (int i = 0; i < 1000; ++i) {
      const double t = 0.1 + (20.0 - 0.1) * i / 999.0;
      const auto d = bessel_derivatives(nu, t);
      const double w = bessel_j(nu, t) * d.dy - bessel_y(nu, t) * d.dj - 2.0 / (pi * t);
      worst_w = std::max(worst_w, std::abs(w));
      if (nu == Order::Zero || nu == Order::Half) {
        const Order up = next_order(nu);
        const double c = bessel_j(nu, t) * bessel_y(up, t) - bessel_y(nu, t) * bessel_j(up, t) + 2.0 / (pi * t);
        worst_c = std::max(worst_c, std::abs(c));
      }
    }
  }
  CHECK(worst_w < 1e-10);
  CHECK(worst_c < 1e-10);
}

TEST_CASE("small-argument limits at t = 1e-4") {
  const double t = 1e-4;
  for (Order nu : kAll) {
    const double v = order_value(nu);
    CHECK(std::tgamma(v + 1.0) * std::pow(2.0, v) * std::pow(t, -v) * bessel_j(nu, t) == doctest::Approx(1.0).epsilon(1e-3));
    if (v > 0.0) {
      CHECK(std::pow(2.0, -v) * pi * std::pow(t, v) * bessel_y(nu, t) == doctest::Approx(-std::tgamma(v)).epsilon(1e-3));
    }
  }
  // Y_0(t) = (2/pi)(log(t/2) + gamma) + O(t^2 log t)
  CHECK(std::abs((pi / 2) * bessel_y(Order::Zero, t) - std::log(t / 2) - std::numbers::egamma) < 1e-6);
}

TEST_CASE("zeros") {
  CHECK(std::abs(first_positive_zero(Order::Half) - pi) < 1e-10);
  CHECK(std::abs(first_positive_zero(Order::Zero) - 2.4048255577) < 1e-8);
  CHECK(std::abs(first_positive_zero(Order::One) - 3.8317059702) < 1e-8);
  CHECK(std::abs(first_positive_zero(Order::ThreeHalves) - 4.4934094579) < 1e-8);
  CHECK(std::abs(positive_zero(Order::Zero, 2) - 5.5200781103) < 1e-8);
  CHECK(std::abs(positive_zero(Order::Half, 3) - 3 * pi) < 1e-10);
  for (Order nu : kAll) {
    CHECK(std::abs(bessel_j(nu, first_positive_zero(nu))) < 1e-9);
  }
}

TEST_CASE("series and asymptotic branches agree at the seam") {
  for (int n : {0, 1}) {
    for (double t : {kSeriesCutoff - 0.5, kSeriesCutoff, kSeriesCutoff + 0.5}) {
      CHECK(std::abs(j_integer_series(n, t) - j_integer_asymptotic(n, t)) < 1e-9);
      CHECK(std::abs(y_integer_series(n, t) - y_integer_asymptotic(n, t)) < 1e-9);
    }
  }
}

TEST_CASE("values at zero and domain errors") {
  CHECK(bessel_j(Order::Zero, 0.0) == 1.0);
  CHECK(bessel_j(Order::One, 0.0) == 0.0);
  CHECK(bessel_j(Order::Half, 0.0) == 0.0);
  CHECK_THROWS_AS(bessel_j(Order::Zero, -1.0), DomainError);
  CHECK_THROWS_AS(bessel_y(Order::Zero, 0.0), DomainError);
  CHECK_THROWS_AS(bessel_y(Order::Half, -2.0), DomainError);
  CHECK_THROWS_AS(order_from_value(2.0), UnsupportedOrder);
  CHECK_THROWS_AS(bessel_j(0.25, 1.0), UnsupportedOrder);
  CHECK(order_from_value(1.5) == Order::ThreeHalves);
}

TEST_CASE("scaled_j has the finite limit at the origin") {
  // r^{-1/2} J_{1/2}(k r) -> sqrt(2k/pi) as r -> 0
  CHECK(scaled_j(Order::Half, 1.0, 0.0) == doctest::Approx(std::sqrt(2.0 / pi)).epsilon(1e-14));
  CHECK(scaled_j(Order::Half, 1.0, 1e-8) == doctest::Approx(std::sqrt(2.0 / pi)).epsilon(1e-12));
  CHECK(scaled_j(Order::Zero, 2.0, 0.0) == 1.0);
}

TEST_CASE("root helpers") {
  const double r = bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0);
  CHECK(std::abs(r - std::sqrt(2.0)) < 1e-12);
  auto roots = roots_in([](double x) { return std::sin(x); }, 0.5, 10.0, 0.1);
  REQUIRE(roots.size() == 3);
  CHECK(std::abs(roots[2] - 3 * pi) < 1e-12);
  RootIterator it([](double x) { return std::cos(x); }, 0.0, 5.0, 0.05);
  CHECK(std::abs(*it.next() - pi / 2) < 1e-12);
  CHECK(std::abs(*it.next() - 3 * pi / 2) < 1e-12);
  CHECK(!it.next());
}

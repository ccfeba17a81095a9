#pragma once

#include <charconv>
#include <cmath>
#include <span>
#include <string>

#include "balent/errors.hpp"

namespace balent {

inline constexpr double kSqrt2Pi = 2.5066282746310002;  // sqrt(2*pi)
inline constexpr double kLn2 = 0.6931471805599453;      // log(2)
inline constexpr double kEuler = 2.718281828459045;     // exp(1)

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double t = std::exp(z);
  return t / (1.0 + t);
}

// log(sigmoid(z)), stable on both tails
inline double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

// log(1 + exp(x))
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double norm_pdf(double z, double mu, double sigma) {
  const double t = (z - mu) / sigma;
  return std::exp(-0.5 * t * t) / (kSqrt2Pi * sigma);
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865476);
}

// -(p log p + q log q) evaluated from the logit; exact under z <-> -z swap
inline double binary_entropy_logit(double z) {
  const double p = sigmoid(z);
  const double q = sigmoid(-z);
  return -(p * log_sigmoid(z) + q * log_sigmoid(-z));
}

// -(p log p + (1-p) log(1-p)); 0 at the endpoints by continuous extension
inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  const double q = 1.0 - p;
  return -(p * std::log(p) + q * std::log(q));
}

inline double sample_mean(std::span<const double> v) {
  if (v.empty()) throw Error(errc::invalid_argument, "mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// unbiased (n-1) sample variance
inline double sample_var(std::span<const double> v) {
  if (v.size() < 2) throw Error(errc::invalid_argument, "variance needs >= 2 samples");
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// shortest decimal form that parses back to the same double; "nan" sentinel
inline std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace balent

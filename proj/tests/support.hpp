#pragma once

#include "pdeid/identification.hpp"
#include "pdeid/library.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>

namespace pdeid::test {

// Clean scenario data prepared once per process.
const PreparedData& clean_data(const std::string& scenario);

// Scenario data with multiplicative noise (seed 7) and default smoothing, cached.
const PreparedData& noisy_data(const std::string& scenario, double delta);

// Measurement field of a clean scenario, cached.
const Field& clean_field(const std::string& scenario);

Field field_from(const std::function<double(double, double)>& f, Eigen::Index nx, Eigen::Index nt,
                 double x0 = 0.0, double dx = 0.1, double t0 = 0.0, double dt = 0.1);

// Points whose dC/dt satisfies the basic-library equation with alpha and m
// exactly; the other derivatives are drawn from a closed-form field.
DerivativeField manufactured_points(const ModelParams& m, const Eigen::Vector4d& alpha,
                                    std::size_t n_space = 40, std::size_t n_time = 50);

DataSplit manufactured_split(const ModelParams& m, const Eigen::Vector4d& alpha);

// Sample standard deviation with divisor n.
double population_std(const std::vector<double>& v);

}  // namespace pdeid::test

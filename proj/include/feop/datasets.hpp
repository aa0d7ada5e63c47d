#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "feop/function_encoder.hpp"
#include "feop/solvers.hpp"
#include "feop/tensor.hpp"

namespace feop::data {

enum class PolyTask { Derivative, AntiDerivative };

struct PolyBatchOptions {
    std::size_t m = 100;       // input sample count
    std::size_t p = 100;       // output sample count
    double scale = 3.0;        // coefficients uniform in [-scale, scale]
    bool fixed_grid = false;   // shared linspace grids instead of i.i.d. draws
};

// Derivative: cubic -> quadratic. AntiDerivative: quadratic -> cubic with
// s(0) = 0. Domain [-10,10]. Exact analytic input/output values. Function i
// of the batch uses the RNG stream seed + i, so generation order is free.
std::vector<SampleSet> gen_polynomial_batch(PolyTask task, std::size_t batch,
                                            const PolyBatchOptions& opts,
                                            std::uint64_t seed);

struct DatasetManifest {
    std::string name;
    std::size_t n_train = 1;
    std::size_t n_test = 1;
    std::size_t m = 1;
    std::size_t p = 1;
    std::size_t x_dim = 1;
    std::size_t y_dim = 1;
    std::size_t d_in = 1;
    std::size_t d_out = 1;
    nlohmann::json params;  // generator parameters (ranges, grids, constants)
    std::uint64_t seed = 0;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<SampleSet> train;
    std::vector<SampleSet> test;
};

// Materialized polynomial dataset (the task is generative; this freezes
// n_train + n_test functions, test functions from a disjoint seed stream).
Dataset build_polynomial(PolyTask task, std::size_t n_train, std::size_t n_test,
                         const PolyBatchOptions& opts, std::uint64_t seed);

// 1D nonlinear Darcy: forcing from a squared-exponential GRF
// (l = 0.04, sigma^2 = 1) on a fixed uniform grid, solved by Newton.
Dataset build_darcy1d(std::size_t n_train, std::size_t n_test, std::size_t n_grid,
                      std::uint64_t seed);

// Parameterized heat plate: input is the raw (T0, diffusivity) pair (m = 1),
// output the series solution on an (x, y, t) product grid over [0,1]^3.
Dataset build_heat(std::size_t n_train, std::size_t n_test, std::size_t nx,
                   std::size_t ny, std::size_t nt, std::uint64_t seed);

// Periodic viscous Burgers: initial fields from the Sobolev-type GRF, solved
// pseudo-spectrally on n_x=128; outputs on an (x, t) grid (n_xo x n_to).
Dataset build_burgers(std::size_t n_train, std::size_t n_test, std::size_t n_xo,
                      std::size_t n_to, double nu, std::uint64_t seed);

// Dispatch by name: derivative | antiderivative | darcy1d | heat | burgers.
// `overrides` may adjust manifest-level counts and generator parameters.
Dataset build_dataset(const std::string& name, const nlohmann::json& overrides,
                      std::uint64_t seed);

// Directory format: manifest.json plus raw little-endian float64 blobs
// xs.bin, fs.bin, ys.bin, tfs.bin shaped [N, count, dim], train rows first.
void write_dataset(const DatasetManifest& manifest, const std::vector<SampleSet>& sets,
                   const std::string& dir);
std::pair<DatasetManifest, std::vector<SampleSet>> read_dataset(const std::string& dir);

void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset_split(const std::string& dir);

}  // namespace feop::data

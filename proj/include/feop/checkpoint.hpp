#pragma once

#include <string>

#include "feop/deeponet.hpp"
#include "feop/function_encoder.hpp"
#include "feop/operator_models.hpp"

namespace feop {

// Parameter checkpoints: <stem>.json lists name -> shape, <stem>.bin holds the
// flat little-endian float64 blobs concatenated in manifest order.
void save_params(const ParameterStore& params, const std::string& dir,
                 const std::string& stem);
ParameterStore load_params(const std::string& dir, const std::string& stem);

// Basis checkpoint = parameter checkpoint + JSON sidecar with
// {k, input_dim, output_dim, domain_tag, architecture, activation}.
void save_basis(const BasisSet& basis, const std::string& dir, const std::string& stem);
BasisSet load_basis(const std::string& dir, const std::string& stem);

void save_b2b(const B2BOperator& op, const std::string& dir);
B2BOperator load_b2b(const std::string& dir);

void save_spectral(const SpectralOperator& op, const std::string& dir);
SpectralOperator load_spectral(const std::string& dir);

void save_deeponet(const DeepONetModel& model, const std::string& dir);
DeepONetModel load_deeponet(const std::string& dir);

}  // namespace feop

#include "feop/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "feop/errors.hpp"

namespace feop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json spec_to_json(const MlpSpec& spec) {
    return json{{"layers", spec.layer_sizes},
                {"activation", spec.activation == Activation::ReLU ? "relu" : "tanh"}};
}

MlpSpec spec_from_json(const json& j) {
    MlpSpec spec;
    spec.layer_sizes = j.at("layers").get<std::vector<std::size_t>>();
    const std::string act = j.at("activation").get<std::string>();
    if (act == "relu")
        spec.activation = Activation::ReLU;
    else if (act == "tanh")
        spec.activation = Activation::Tanh;
    else
        throw DataError("checkpoint: unknown activation '" + act + "'");
    return spec;
}

}  // namespace

void save_params(const ParameterStore& params, const std::string& dir,
                 const std::string& stem) {
    fs::create_directories(dir);
    json manifest = json::array();
    for (const auto& [name, t] : params)
        manifest.push_back({{"name", name}, {"shape", t.shape()}});
    {
        std::ofstream out(fs::path(dir) / (stem + ".json"));
        out << json{{"params", manifest}}.dump(2) << "\n";
        if (!out) throw DataError("save_params: cannot write manifest for " + stem);
    }
    std::ofstream bin(fs::path(dir) / (stem + ".bin"), std::ios::binary);
    for (const auto& [name, t] : params)
        bin.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!bin) throw DataError("save_params: cannot write blob for " + stem);
}

ParameterStore load_params(const std::string& dir, const std::string& stem) {
    std::ifstream in(fs::path(dir) / (stem + ".json"));
    if (!in) throw DataError("load_params: missing " + stem + ".json in " + dir);
    json j;
    in >> j;
    std::ifstream bin(fs::path(dir) / (stem + ".bin"), std::ios::binary);
    if (!bin) throw DataError("load_params: missing " + stem + ".bin in " + dir);

    ParameterStore store;
    for (const auto& entry : j.at("params")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        Tensor t(shape);
        bin.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!bin) throw DataError("load_params: blob too short for " + name);
        if (!t.all_finite()) throw DataError("load_params: non-finite values in " + name);
        store.add(name, std::move(t));
    }
    return store;
}

void save_basis(const BasisSet& basis, const std::string& dir, const std::string& stem) {
    save_params(basis.params, dir, stem);
    json side{{"k", basis.k},
              {"input_dim", basis.input_dim},
              {"output_dim", basis.output_dim},
              {"domain_tag", basis.domain == DomainTag::InputSpace ? "input" : "output"},
              {"architecture", spec_to_json(basis.arch)}};
    std::ofstream out(fs::path(dir) / (stem + ".basis.json"));
    out << side.dump(2) << "\n";
    if (!out) throw DataError("save_basis: cannot write sidecar for " + stem);
}

BasisSet load_basis(const std::string& dir, const std::string& stem) {
    std::ifstream in(fs::path(dir) / (stem + ".basis.json"));
    if (!in) throw DataError("load_basis: missing " + stem + ".basis.json in " + dir);
    json j;
    in >> j;
    BasisSet b;
    b.k = j.at("k").get<std::size_t>();
    b.input_dim = j.at("input_dim").get<std::size_t>();
    b.output_dim = j.at("output_dim").get<std::size_t>();
    b.domain = j.at("domain_tag").get<std::string>() == "input" ? DomainTag::InputSpace
                                                                : DomainTag::OutputSpace;
    b.arch = spec_from_json(j.at("architecture"));
    b.params = load_params(dir, stem);
    return b;
}

void save_b2b(const B2BOperator& op, const std::string& dir) {
    save_basis(op.input_basis, dir, "input_basis");
    save_basis(op.output_basis, dir, "output_basis");
    json header{{"kind", std::holds_alternative<LinearCoeffMap>(op.map) ? "linear"
                                                                        : "nonlinear"},
                {"k", op.input_basis.k},
                {"l", op.output_basis.k},
                {"ridge", op.ridge}};
    if (std::holds_alternative<LinearCoeffMap>(op.map)) {
        ParameterStore m;
        m.add("A", std::get<LinearCoeffMap>(op.map).a);
        save_params(m, dir, "map");
    } else {
        const CoeffNetwork& net = std::get<CoeffNetwork>(op.map);
        save_params(net.params, dir, "map");
        header["map_architecture"] = spec_to_json(net.arch);
        header["map_input_scale"] = net.input_scale;
        header["map_output_scale"] = net.output_scale;
    }
    std::ofstream out(fs::path(dir) / "operator.json");
    out << header.dump(2) << "\n";
    if (!out) throw DataError("save_b2b: cannot write operator.json");
}

B2BOperator load_b2b(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "operator.json");
    if (!in) throw DataError("load_b2b: missing operator.json in " + dir);
    json j;
    in >> j;
    B2BOperator op;
    op.input_basis = load_basis(dir, "input_basis");
    op.output_basis = load_basis(dir, "output_basis");
    op.ridge = j.at("ridge").get<double>();
    if (j.at("kind").get<std::string>() == "linear") {
        op.map = LinearCoeffMap{load_params(dir, "map").at("A")};
    } else {
        CoeffNetwork net;
        net.arch = spec_from_json(j.at("map_architecture"));
        net.params = load_params(dir, "map");
        net.input_scale = j.value("map_input_scale", 1.0);
        net.output_scale = j.value("map_output_scale", 1.0);
        op.map = std::move(net);
    }
    return op;
}

void save_spectral(const SpectralOperator& op, const std::string& dir) {
    save_basis(op.right_basis, dir, "right_basis");
    if (op.kind == SpectralKind::Svd) save_basis(op.left_basis, dir, "left_basis");
    ParameterStore vals;
    vals.add("values", op.values);
    save_params(vals, dir, "values");
    json header{{"kind", op.kind == SpectralKind::Svd ? "svd" : "ed"},
                {"k", op.right_basis.k},
                {"ridge", op.ridge}};
    std::ofstream out(fs::path(dir) / "operator.json");
    out << header.dump(2) << "\n";
    if (!out) throw DataError("save_spectral: cannot write operator.json");
}

SpectralOperator load_spectral(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "operator.json");
    if (!in) throw DataError("load_spectral: missing operator.json in " + dir);
    json j;
    in >> j;
    SpectralOperator op;
    op.kind = j.at("kind").get<std::string>() == "svd" ? SpectralKind::Svd
                                                       : SpectralKind::Ed;
    op.ridge = j.at("ridge").get<double>();
    op.right_basis = load_basis(dir, "right_basis");
    if (op.kind == SpectralKind::Svd) op.left_basis = load_basis(dir, "left_basis");
    op.values = load_params(dir, "values").at("values");
    return op;
}

void save_deeponet(const DeepONetModel& model, const std::string& dir) {
    fs::create_directories(dir);
    save_params(model.branch, dir, "branch");
    ParameterStore extras;
    extras.add("sensor_xs", model.sensor_xs);
    const char* variant = model.variant == DeepONetVariant::Vanilla ? "vanilla"
                          : model.variant == DeepONetVariant::Pod  ? "pod"
                                                                   : "two_stage";
    json header{{"variant", variant},
                {"latent", model.latent},
                {"branch_architecture", spec_to_json(model.branch_arch)},
                {"input_scale", model.input_scale},
                {"output_scale", model.output_scale},
                {"query_scale", model.query_scale}};
    if (model.variant == DeepONetVariant::Pod) {
        extras.add("pod_mean", model.pod_mean);
        extras.add("pod_modes", model.pod_modes);
        extras.add("pod_grid", model.pod_grid);
    } else {
        save_params(model.trunk, dir, "trunk");
        header["trunk_architecture"] = spec_to_json(model.trunk_arch);
        if (model.variant == DeepONetVariant::TwoStage)
            extras.add("trunk_recombiner", model.trunk_recombiner);
    }
    save_params(extras, dir, "extras");
    std::ofstream out(fs::path(dir) / "operator.json");
    out << header.dump(2) << "\n";
    if (!out) throw DataError("save_deeponet: cannot write operator.json");
}

DeepONetModel load_deeponet(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "operator.json");
    if (!in) throw DataError("load_deeponet: missing operator.json in " + dir);
    json j;
    in >> j;
    DeepONetModel model;
    const std::string variant = j.at("variant").get<std::string>();
    model.variant = variant == "vanilla" ? DeepONetVariant::Vanilla
                    : variant == "pod"   ? DeepONetVariant::Pod
                                         : DeepONetVariant::TwoStage;
    model.latent = j.at("latent").get<std::size_t>();
    model.input_scale = j.value("input_scale", 1.0);
    model.output_scale = j.value("output_scale", 1.0);
    model.query_scale = j.value("query_scale", 1.0);
    model.branch_arch = spec_from_json(j.at("branch_architecture"));
    model.branch = load_params(dir, "branch");
    ParameterStore extras = load_params(dir, "extras");
    model.sensor_xs = extras.at("sensor_xs");
    if (model.variant == DeepONetVariant::Pod) {
        model.pod_mean = extras.at("pod_mean");
        model.pod_modes = extras.at("pod_modes");
        model.pod_grid = extras.at("pod_grid");
    } else {
        model.trunk_arch = spec_from_json(j.at("trunk_architecture"));
        model.trunk = load_params(dir, "trunk");
        if (model.variant == DeepONetVariant::TwoStage)
            model.trunk_recombiner = extras.at("trunk_recombiner");
    }
    return model;
}

}  // namespace feop

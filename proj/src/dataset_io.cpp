#include <filesystem>
#include <fstream>

#include "feop/datasets.hpp"
#include "feop/errors.hpp"

namespace feop::data {

namespace fs = std::filesystem;

namespace {

void write_blob(const fs::path& path, const std::vector<const Tensor*>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_dataset: cannot open " + path.string());
    for (const Tensor* t : tensors)
        out.write(reinterpret_cast<const char*>(t->data()),
                  static_cast<std::streamsize>(t->size() * sizeof(double)));
    if (!out) throw DataError("write_dataset: write failed for " + path.string());
}

std::vector<double> read_blob(const fs::path& path, std::size_t expected_doubles) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("read_dataset: cannot open " + path.string());
    const std::streamsize bytes = in.tellg();
    const std::streamsize want =
        static_cast<std::streamsize>(expected_doubles * sizeof(double));
    if (bytes != want)
        throw DataError("read_dataset: " + path.filename().string() + " holds " +
                        std::to_string(bytes) + " bytes, manifest requires " +
                        std::to_string(want));
    in.seekg(0);
    std::vector<double> data(expected_doubles);
    in.read(reinterpret_cast<char*>(data.data()), want);
    if (!in) throw DataError("read_dataset: short read from " + path.string());
    return data;
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    return nlohmann::json{{"name", m.name},     {"n_train", m.n_train},
                          {"n_test", m.n_test}, {"m", m.m},
                          {"p", m.p},           {"x_dim", m.x_dim},
                          {"y_dim", m.y_dim},   {"d_in", m.d_in},
                          {"d_out", m.d_out},   {"params", m.params},
                          {"seed", m.seed}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.n_train = j.at("n_train").get<std::size_t>();
        m.n_test = j.at("n_test").get<std::size_t>();
        m.m = j.at("m").get<std::size_t>();
        m.p = j.at("p").get<std::size_t>();
        m.x_dim = j.at("x_dim").get<std::size_t>();
        m.y_dim = j.at("y_dim").get<std::size_t>();
        m.d_in = j.at("d_in").get<std::size_t>();
        m.d_out = j.at("d_out").get<std::size_t>();
        m.params = j.value("params", nlohmann::json::object());
        m.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("read_dataset: malformed manifest: ") + e.what());
    }
    if (m.n_train + m.n_test < 1) throw DataError("read_dataset: empty dataset");
    return m;
}

}  // namespace

void write_dataset(const DatasetManifest& manifest, const std::vector<SampleSet>& sets,
                   const std::string& dir) {
    if (sets.size() != manifest.n_train + manifest.n_test)
        throw DimensionError("write_dataset: set count does not match manifest");
    for (const SampleSet& s : sets) {
        if (s.xs.dim(0) != manifest.m || s.ys.dim(0) != manifest.p)
            throw DimensionError("write_dataset: sample counts differ from manifest");
    }
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "manifest.json");
        out << manifest_to_json(manifest).dump(2) << "\n";
        if (!out) throw DataError("write_dataset: cannot write manifest.json");
    }
    std::vector<const Tensor*> xs, fs_, ys, tfs;
    for (const SampleSet& s : sets) {
        xs.push_back(&s.xs);
        fs_.push_back(&s.fs);
        ys.push_back(&s.ys);
        tfs.push_back(&s.tfs);
    }
    write_blob(fs::path(dir) / "xs.bin", xs);
    write_blob(fs::path(dir) / "fs.bin", fs_);
    write_blob(fs::path(dir) / "ys.bin", ys);
    write_blob(fs::path(dir) / "tfs.bin", tfs);
}

std::pair<DatasetManifest, std::vector<SampleSet>> read_dataset(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw DataError("read_dataset: missing manifest.json in " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("read_dataset: manifest.json is not JSON: ") +
                        e.what());
    }
    DatasetManifest m = manifest_from_json(j);
    const std::size_t n = m.n_train + m.n_test;

    auto xs = read_blob(fs::path(dir) / "xs.bin", n * m.m * m.x_dim);
    auto fs_ = read_blob(fs::path(dir) / "fs.bin", n * m.m * m.d_in);
    auto ys = read_blob(fs::path(dir) / "ys.bin", n * m.p * m.y_dim);
    auto tfs = read_blob(fs::path(dir) / "tfs.bin", n * m.p * m.d_out);

    std::vector<SampleSet> sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto slice = [&](const std::vector<double>& src, std::size_t count,
                         std::size_t dim) {
            std::vector<double> d(src.begin() + static_cast<std::ptrdiff_t>(i * count * dim),
                                  src.begin() + static_cast<std::ptrdiff_t>((i + 1) * count * dim));
            return Tensor::checked({count, dim}, std::move(d), "dataset blob");
        };
        sets[i].xs = slice(xs, m.m, m.x_dim);
        sets[i].fs = slice(fs_, m.m, m.d_in);
        sets[i].ys = slice(ys, m.p, m.y_dim);
        sets[i].tfs = slice(tfs, m.p, m.d_out);
    }
    return {std::move(m), std::move(sets)};
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    std::vector<SampleSet> all;
    all.reserve(ds.train.size() + ds.test.size());
    for (const SampleSet& s : ds.train) all.push_back(s);
    for (const SampleSet& s : ds.test) all.push_back(s);
    write_dataset(ds.manifest, all, dir);
}

Dataset read_dataset_split(const std::string& dir) {
    auto [manifest, sets] = read_dataset(dir);
    Dataset ds;
    ds.manifest = manifest;
    ds.train.assign(sets.begin(), sets.begin() + static_cast<std::ptrdiff_t>(manifest.n_train));
    ds.test.assign(sets.begin() + static_cast<std::ptrdiff_t>(manifest.n_train), sets.end());
    return ds;
}

}  // namespace feop::data

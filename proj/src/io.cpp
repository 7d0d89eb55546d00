#include "cliff/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cliff::io {

using nlohmann::json;

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << content;
        if (!os) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

json spec_to_json(const synth::GridDensitySpec& spec) {
    return json{{"d", spec.d},
                {"thresholds", spec.thresholds},
                {"cell_masses", spec.cell_masses},
                {"min_jump", spec.min_jump}};
}

synth::GridDensitySpec spec_from_json(const json& j) {
    synth::GridDensitySpec spec;
    spec.d = j.at("d").get<int>();
    spec.thresholds = j.at("thresholds").get<std::vector<std::vector<double>>>();
    spec.cell_masses = j.at("cell_masses").get<std::vector<double>>();
    spec.min_jump = j.at("min_jump").get<double>();
    spec.validate();
    return spec;
}

json mixing_to_json(const synth::MixingSpec& mix) {
    return json{{"d", mix.d}, {"a", mix.a}, {"b", mix.b}, {"scale", mix.scale}};
}

synth::MixingSpec mixing_from_json(const json& j) {
    synth::MixingSpec mix;
    mix.d = j.at("d").get<int>();
    mix.a = j.at("a").get<std::vector<double>>();
    mix.b = j.at("b").get<std::vector<double>>();
    mix.scale = j.at("scale").get<double>();
    mix.validate();
    return mix;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

}  // namespace

void write_dataset(const std::filesystem::path& csv_path, const Dataset& ds) {
    if (ds.z.n != ds.x.n) throw IoError("write_dataset: z and x row counts differ");
    std::ostringstream os;
    for (std::size_t i = 0; i < ds.z.d; ++i) os << (i ? "," : "") << "z_" << (i + 1);
    for (std::size_t i = 0; i < ds.x.d; ++i) os << ",x_" << (i + 1);
    os << "\n";
    for (std::size_t k = 0; k < ds.z.n; ++k) {
        for (std::size_t i = 0; i < ds.z.d; ++i)
            os << (i ? "," : "") << format_double(ds.z.at(k, i));
        for (std::size_t i = 0; i < ds.x.d; ++i) os << "," << format_double(ds.x.at(k, i));
        os << "\n";
    }
    write_file_atomic(csv_path, os.str());

    json side{{"spec", spec_to_json(ds.spec)},
              {"mixing", mixing_to_json(ds.mixing)},
              {"dataset_seed", ds.seed}};
    write_file_atomic(sidecar_path(csv_path), side.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
    Dataset ds;
    std::istringstream is(read_file(csv_path));
    std::string line;
    if (!std::getline(is, line)) throw IoError("read_dataset: empty file " + csv_path.string());

    std::size_t d = 0, dd = 0;
    {
        std::istringstream hs(line);
        std::string tok;
        while (std::getline(hs, tok, ',')) {
            if (tok.rfind("z_", 0) == 0)
                ++d;
            else if (tok.rfind("x_", 0) == 0)
                ++dd;
            else
                throw IoError("read_dataset: unexpected column '" + tok + "'");
        }
    }
    if (d == 0 || dd == 0) throw IoError("read_dataset: header must name z_* and x_* columns");

    std::vector<double> zvals, xvals;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::size_t c = 0;
        while (std::getline(ls, tok, ',')) {
            const double v = std::stod(tok);
            if (c < d)
                zvals.push_back(v);
            else
                xvals.push_back(v);
            ++c;
        }
        if (c != d + dd) throw IoError("read_dataset: row with wrong column count");
        ++n;
    }
    ds.z.n = ds.x.n = n;
    ds.z.d = d;
    ds.x.d = dd;
    ds.z.values = std::move(zvals);
    ds.x.values = std::move(xvals);
    ds.z.provenance = synth::LatentBatch::Provenance::true_z;
    ds.x.provenance = synth::LatentBatch::Provenance::observed_x;

    const auto side = sidecar_path(csv_path);
    if (std::filesystem::exists(side)) {
        const json j = json::parse(read_file(side));
        ds.spec = spec_from_json(j.at("spec"));
        ds.mixing = mixing_from_json(j.at("mixing"));
        ds.seed = j.at("dataset_seed").get<std::uint64_t>();
        ds.has_sidecar = true;
    } else {
        ds.has_sidecar = false;
    }
    return ds;
}

void write_params(const std::filesystem::path& path, const trainer::EncoderParams& params) {
    json j{{"layer_dims", params.spec.layer_dims},
           {"weights", params.weights},
           {"biases", params.biases}};
    write_file_atomic(path, j.dump(2) + "\n");
}

trainer::EncoderParams read_params(const std::filesystem::path& path) {
    trainer::EncoderParams p;
    json j;
    try {
        j = json::parse(read_file(path));
        p.spec.layer_dims = j.at("layer_dims").get<std::vector<int>>();
        p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw IoError("read_params: " + path.string() + ": " + e.what());
    }
    p.spec.validate();
    if (p.weights.size() + 1 != p.spec.layer_dims.size() || p.biases.size() != p.weights.size())
        throw IoError("read_params: layer count does not match dims");
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const auto expect_w = static_cast<std::size_t>(p.spec.layer_dims[l]) *
                              static_cast<std::size_t>(p.spec.layer_dims[l + 1]);
        if (p.weights[l].size() != expect_w ||
            p.biases[l].size() != static_cast<std::size_t>(p.spec.layer_dims[l + 1]))
            throw IoError("read_params: layer " + std::to_string(l) + " has wrong shape");
    }
    return p;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<trainer::EpochRecord>& log) {
    std::ostringstream os;
    os << "epoch,l_uni,l_biv,l_kl_uni,total\n";
    for (const auto& rec : log) {
        os << rec.epoch << "," << format_double(rec.report.l_uni) << ","
           << format_double(rec.report.l_biv) << "," << format_double(rec.report.l_kl_uni) << ","
           << format_double(rec.report.total) << "\n";
    }
    write_file_atomic(path, os.str());
}

}  // namespace cliff::io

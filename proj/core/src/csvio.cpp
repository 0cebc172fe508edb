#include "ratweyl/csvio.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ratweyl::io {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_tag(const std::string& text) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(text));
    return buf;
}

std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

struct Meta {
    std::string kind;
    std::map<std::string, std::string> kv;
};

std::ofstream open_out(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw validation_error("cannot open output file " + file.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw validation_error("cannot open input file " + file.string());
    return in;
}

void write_meta(std::ofstream& out, const std::string& kind, const std::string& config_hash,
                const std::map<std::string, std::string>& kv) {
    out << "# ratweyl " << kind << " config=" << config_hash;
    for (const auto& [k, v] : kv) out << ' ' << k << '=' << v;
    out << '\n';
}

Meta read_meta(std::ifstream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ratweyl ", 0) != 0)
        throw validation_error("file does not start with a ratweyl metadata line");
    std::istringstream ss(line.substr(2));
    Meta meta;
    std::string tag;
    ss >> tag >> meta.kind;
    std::string item;
    while (ss >> item) {
        const auto eq = item.find('=');
        if (eq != std::string::npos) meta.kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return meta;
}

std::vector<double> split_row(const std::string& line) {
    std::vector<double> vals;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    return vals;
}

double meta_num(const Meta& m, const std::string& key) {
    const auto it = m.kv.find(key);
    if (it == m.kv.end()) throw validation_error("metadata key missing: " + key);
    return std::stod(it->second);
}

PoleSet meta_poles(const Meta& m) {
    const int count = static_cast<int>(meta_num(m, "m"));
    PoleSet poles;
    for (int k = 0; k < count; ++k) {
        poles.d.push_back(meta_num(m, "d" + std::to_string(k + 1)));
        poles.b.push_back(static_cast<int>(meta_num(m, "b" + std::to_string(k + 1))));
    }
    poles.validate();
    return poles;
}

void put_poles(std::map<std::string, std::string>& kv, const PoleSet& poles) {
    kv["m"] = std::to_string(poles.size());
    for (int k = 0; k < poles.size(); ++k) {
        kv["d" + std::to_string(k + 1)] = format_full(poles.d[k]);
        kv["b" + std::to_string(k + 1)] = std::to_string(poles.b[k]);
    }
}

}  // namespace

void write_weyl(const std::filesystem::path& file, const WeylData& data,
                const std::string& config_hash) {
    auto out = open_out(file);
    std::map<std::string, std::string> kv;
    put_poles(kv, data.poles);
    kv["eta"] = format_full(data.eta);
    kv["M"] = format_full(data.cutoff_M);
    kv["l"] = format_full(data.interval_l);
    kv["trunc"] = format_full(data.truncation_bound);
    for (int k = 0; k < data.pole_count(); ++k) {
        kv["re_c" + std::to_string(k + 1)] = format_full(data.c[k].real());
        kv["im_c" + std::to_string(k + 1)] = format_full(data.c[k].imag());
    }
    write_meta(out, "weyl", config_hash, kv);
    out << "zeta";
    for (int k = 1; k <= data.pole_count(); ++k) out << ",re_phi_" << k << ",im_phi_" << k;
    out << '\n';
    for (int j = 0; j < data.sample_count(); ++j) {
        out << format_full(data.zeta[j]);
        for (int k = 0; k < data.pole_count(); ++k)
            out << ',' << format_full(data.samples[k][j].real()) << ','
                << format_full(data.samples[k][j].imag());
        out << '\n';
    }
}

WeylData read_weyl(const std::filesystem::path& file) {
    auto in = open_in(file);
    const Meta meta = read_meta(in);
    if (meta.kind != "weyl") throw validation_error("expected a weyl file");
    WeylData data;
    data.poles = meta_poles(meta);
    data.eta = meta_num(meta, "eta");
    data.cutoff_M = meta_num(meta, "M");
    data.interval_l = meta_num(meta, "l");
    data.truncation_bound = meta_num(meta, "trunc");
    const int m = data.pole_count();
    data.c.resize(m);
    for (int k = 0; k < m; ++k)
        data.c[k] = cplx(meta_num(meta, "re_c" + std::to_string(k + 1)),
                         meta_num(meta, "im_c" + std::to_string(k + 1)));
    std::string line;
    std::getline(in, line);  // header
    data.samples.assign(m, {});
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto vals = split_row(line);
        if (static_cast<int>(vals.size()) != 1 + 2 * m)
            throw validation_error("weyl row has wrong column count");
        data.zeta.push_back(vals[0]);
        for (int k = 0; k < m; ++k)
            data.samples[k].push_back(cplx(vals[1 + 2 * k], vals[2 + 2 * k]));
    }
    return data;
}

void write_potential(const std::filesystem::path& file, const PotentialField& pot,
                     const std::string& config_hash) {
    auto out = open_out(file);
    std::map<std::string, std::string> kv;
    kv["m"] = std::to_string(pot.poles());
    kv["l"] = format_full(pot.grid().l);
    kv["n"] = std::to_string(pot.grid().n);
    write_meta(out, "potential", config_hash, kv);
    out << "x";
    for (int k = 1; k <= pot.poles(); ++k)
        out << ",re_beta_" << k << "_1,im_beta_" << k << "_1,re_beta_" << k << "_2,im_beta_" << k
            << "_2";
    out << '\n';
    for (int i = 0; i < pot.grid().nodes(); ++i) {
        out << format_full(pot.grid().x(i));
        for (int k = 0; k < pot.poles(); ++k) {
            const Eigen::RowVector2cd r = pot.row(k, i);
            out << ',' << format_full(r(0).real()) << ',' << format_full(r(0).imag()) << ','
                << format_full(r(1).real()) << ',' << format_full(r(1).imag());
        }
        out << '\n';
    }
}

PotentialField read_potential(const std::filesystem::path& file) {
    auto in = open_in(file);
    const Meta meta = read_meta(in);
    if (meta.kind != "potential") throw validation_error("expected a potential file");
    const int m = static_cast<int>(meta_num(meta, "m"));
    const GridSpec grid(meta_num(meta, "l"), static_cast<int>(meta_num(meta, "n")));
    std::string line;
    std::getline(in, line);
    std::vector<Eigen::Matrix<cplx, Eigen::Dynamic, 2>> rows(m);
    for (auto& r : rows) r.resize(grid.nodes(), 2);
    int i = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto vals = split_row(line);
        if (static_cast<int>(vals.size()) != 1 + 4 * m || i >= grid.nodes())
            throw validation_error("potential row mismatch");
        for (int k = 0; k < m; ++k) {
            rows[k](i, 0) = cplx(vals[1 + 4 * k], vals[2 + 4 * k]);
            rows[k](i, 1) = cplx(vals[3 + 4 * k], vals[4 + 4 * k]);
        }
        ++i;
    }
    if (i != grid.nodes()) throw validation_error("potential file is truncated");
    return PotentialField(grid, std::move(rows));
}

void write_columns(const std::filesystem::path& file, const Phi2Field& columns,
                   const std::string& config_hash) {
    auto out = open_out(file);
    std::map<std::string, std::string> kv;
    kv["m"] = std::to_string(columns.m);
    kv["l"] = format_full(columns.grid.l);
    kv["n"] = std::to_string(columns.grid.n);
    kv["tail_estimate"] = format_full(columns.tail_estimate);
    write_meta(out, "columns", config_hash, kv);
    out << "x";
    for (int k = 1; k <= columns.m; ++k)
        out << ",re_phi2_" << k << ",im_phi2_" << k << ",re_dphi2_" << k << ",im_dphi2_" << k;
    out << '\n';
    for (int i = 0; i < columns.grid.nodes(); ++i) {
        out << format_full(columns.grid.x(i));
        for (int k = 0; k < columns.m; ++k)
            out << ',' << format_full(columns.value[k](i).real()) << ','
                << format_full(columns.value[k](i).imag()) << ','
                << format_full(columns.d1[k](i).real()) << ','
                << format_full(columns.d1[k](i).imag());
        out << '\n';
    }
}

void write_weyl_set(const std::filesystem::path& file, const WeylSetData& ws,
                    const std::string& config_hash) {
    auto out = open_out(file);
    std::map<std::string, std::string> kv;
    put_poles(kv, ws.poles);
    kv["eta"] = format_full(ws.eta);
    for (size_t k = 0; k < ws.beta0.size(); ++k) {
        const std::string tag = std::to_string(k + 1);
        kv["part" + tag] = std::to_string(ws.partition[k]);
        kv["re_b" + tag + "1"] = format_full(ws.beta0[k](0).real());
        kv["im_b" + tag + "1"] = format_full(ws.beta0[k](0).imag());
        kv["re_b" + tag + "2"] = format_full(ws.beta0[k](1).real());
        kv["im_b" + tag + "2"] = format_full(ws.beta0[k](1).imag());
    }
    write_meta(out, "weylset", config_hash, kv);
    out << "zeta";
    for (size_t k = 1; k <= ws.beta0.size(); ++k) out << ",re_psi_" << k << ",im_psi_" << k;
    out << '\n';
    for (size_t j = 0; j < ws.zeta.size(); ++j) {
        out << format_full(ws.zeta[j]);
        for (size_t k = 0; k < ws.beta0.size(); ++k)
            out << ',' << format_full(ws.psi[k][j].real()) << ','
                << format_full(ws.psi[k][j].imag());
        out << '\n';
    }
}

WeylSetData read_weyl_set(const std::filesystem::path& file) {
    auto in = open_in(file);
    const Meta meta = read_meta(in);
    if (meta.kind != "weylset") throw validation_error("expected a weylset file");
    WeylSetData ws;
    ws.poles = meta_poles(meta);
    ws.eta = meta_num(meta, "eta");
    const int m = ws.poles.size();
    for (int k = 0; k < m; ++k) {
        const std::string tag = std::to_string(k + 1);
        ws.partition.push_back(static_cast<int>(meta_num(meta, "part" + tag)));
        Eigen::RowVector2cd b0;
        b0 << cplx(meta_num(meta, "re_b" + tag + "1"), meta_num(meta, "im_b" + tag + "1")),
            cplx(meta_num(meta, "re_b" + tag + "2"), meta_num(meta, "im_b" + tag + "2"));
        ws.beta0.push_back(b0);
    }
    std::string line;
    std::getline(in, line);
    ws.psi.assign(m, {});
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto vals = split_row(line);
        if (static_cast<int>(vals.size()) != 1 + 2 * m)
            throw validation_error("weylset row has wrong column count");
        ws.zeta.push_back(vals[0]);
        for (int k = 0; k < m; ++k) ws.psi[k].push_back(cplx(vals[1 + 2 * k], vals[2 + 2 * k]));
    }
    ws.validate();
    return ws;
}

void write_boundary(const std::filesystem::path& file, const sg::BoundaryData& data,
                    const std::string& config_hash) {
    auto out = open_out(file);
    std::map<std::string, std::string> kv;
    kv["t_max"] = format_full(data.t_max);
    kv["n"] = std::to_string(data.n);
    write_meta(out, "boundary", config_hash, kv);
    out << "t,omega0,omega1\n";
    for (int j = 0; j < data.nodes(); ++j)
        out << format_full(data.t(j)) << ',' << format_full(data.omega0(j)) << ','
            << format_full(data.omega1(j)) << '\n';
}

sg::BoundaryData read_boundary(const std::filesystem::path& file) {
    auto in = open_in(file);
    const Meta meta = read_meta(in);
    if (meta.kind != "boundary") throw validation_error("expected a boundary file");
    sg::BoundaryData data;
    data.t_max = meta_num(meta, "t_max");
    data.n = static_cast<int>(meta_num(meta, "n"));
    data.omega0.resize(data.nodes());
    data.omega1.resize(data.nodes());
    std::string line;
    std::getline(in, line);
    int j = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto vals = split_row(line);
        if (vals.size() != 3 || j >= data.nodes()) throw validation_error("boundary row mismatch");
        data.omega0(j) = vals[1];
        data.omega1(j) = vals[2];
        ++j;
    }
    if (j != data.nodes()) throw validation_error("boundary file is truncated");
    data.validate();
    return data;
}

void write_cos_omega(const std::filesystem::path& file, const GridSpec& grid,
                     const Eigen::VectorXd& values, const std::string& config_hash) {
    auto out = open_out(file);
    std::map<std::string, std::string> kv;
    kv["l"] = format_full(grid.l);
    kv["n"] = std::to_string(grid.n);
    write_meta(out, "cos_omega", config_hash, kv);
    out << "x,cos_omega\n";
    for (int i = 0; i < grid.nodes(); ++i)
        out << format_full(grid.x(i)) << ',' << format_full(values(i)) << '\n';
}

void write_diagnostics(const std::filesystem::path& file,
                       const std::map<std::string, std::string>& items,
                       const std::string& config_hash) {
    auto out = open_out(file);
    write_meta(out, "diagnostics", config_hash, {});
    for (const auto& [k, v] : items) out << k << '=' << v << '\n';
}

}  // namespace ratweyl::io

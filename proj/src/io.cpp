#include "convlab/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace convlab {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_gridfn_csv(const GridFn& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# gridfn d=" << f.grid.dim << " N=" << f.grid.n
        << " step=" << format_double(f.grid.step)
        << " domain=" << (f.grid.domain == Domain::frequency ? "freq" : "space")
        << " hermitian=" << (f.hermitian ? 1 : 0) << "\n";
    for (int k = 0; k < f.grid.dim; ++k) out << "i" << k << ",";
    out << "re,im\n";
    int idx[3];
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        unflatten(f.grid, i, idx);
        for (int k = 0; k < f.grid.dim; ++k) out << idx[k] << ",";
        out << format_double(f.values[i].real()) << "," << format_double(f.values[i].imag())
            << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

GridFn read_gridfn_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("# gridfn", 0) != 0)
        throw IoError(path + ": missing gridfn header");

    Grid grid;
    bool hermitian = false;
    std::istringstream hs(header.substr(8));
    std::string tok;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "d") grid.dim = std::stoi(val);
        else if (key == "N") grid.n = std::stoi(val);
        else if (key == "step") grid.step = std::stod(val);
        else if (key == "domain") grid.domain = val == "freq" ? Domain::frequency : Domain::space;
        else if (key == "hermitian") hermitian = val == "1";
    }
    if (grid.n <= 0 || grid.dim < 1 || grid.dim > 3 || !(grid.step > 0))
        throw IoError(path + ": bad gridfn header");

    std::string line;
    std::getline(in, line);  // column header
    GridFn f = make_fn(grid, hermitian);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = split_csv(line);
        if (parts.size() != static_cast<std::size_t>(grid.dim) + 2)
            throw IoError(path + ": bad row '" + line + "'");
        int idx[3];
        for (int k = 0; k < grid.dim; ++k) idx[k] = std::stoi(parts[static_cast<std::size_t>(k)]);
        const std::size_t flat = flatten(grid, idx);
        f.values[flat] = cplx{std::stod(parts[static_cast<std::size_t>(grid.dim)]),
                              std::stod(parts[static_cast<std::size_t>(grid.dim) + 1])};
        ++rows;
    }
    if (rows != f.values.size()) throw IoError(path + ": row count mismatch");
    return f;
}

void write_sample_csv(const Sample& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    bool first = true;
    auto col = [&](const std::string& name) {
        if (!first) out << ",";
        out << name;
        first = false;
    };
    for (int k = 0; k < s.d; ++k) col("z" + std::to_string(k + 1));
    if (s.has_x())
        for (int k = 0; k < s.d; ++k) col("x" + std::to_string(k + 1));
    if (s.has_y()) col("y");
    if (!s.y2.empty()) col("y2");
    out << "\n";
    for (std::size_t j = 0; j < s.n; ++j) {
        bool f2 = true;
        auto val = [&](double v) {
            if (!f2) out << ",";
            out << format_double(v);
            f2 = false;
        };
        for (int k = 0; k < s.d; ++k) val(s.zv(j, k));
        if (s.has_x())
            for (int k = 0; k < s.d; ++k) val(s.xv(j, k));
        if (s.has_y()) val(s.y[j]);
        if (!s.y2.empty()) val(s.y2[j]);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

Sample read_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header)) throw IoError(path + ": empty file");
    const auto cols = split_csv(header);

    int d = 0;
    bool has_x = false, has_y = false, has_y2 = false;
    for (const auto& c : cols) {
        if (c.size() >= 2 && c[0] == 'z') d = std::max(d, std::stoi(c.substr(1)));
        else if (c.size() >= 2 && c[0] == 'x') has_x = true;
        else if (c == "y") has_y = true;
        else if (c == "y2") has_y2 = true;
        else throw IoError(path + ": unexpected column '" + c + "'");
    }
    if (d < 1) throw IoError(path + ": no z columns");

    Sample s;
    s.d = d;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = split_csv(line);
        if (parts.size() != cols.size()) throw IoError(path + ": ragged row");
        std::size_t c = 0;
        for (int k = 0; k < d; ++k) s.z.push_back(std::stod(parts[c++]));
        if (has_x)
            for (int k = 0; k < d; ++k) s.x.push_back(std::stod(parts[c++]));
        if (has_y) s.y.push_back(std::stod(parts[c++]));
        if (has_y2) s.y2.push_back(std::stod(parts[c++]));
        ++s.n;
    }
    validate_sample(s);
    return s;
}

void write_mask_csv(const SupportMask& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (int k = 0; k < m.grid.dim; ++k) out << "i" << k << ",";
    out << "in_mask,component_id\n";
    int idx[3];
    for (std::size_t i = 0; i < m.mask.size(); ++i) {
        unflatten(m.grid, i, idx);
        for (int k = 0; k < m.grid.dim; ++k) out << idx[k] << ",";
        out << static_cast<int>(m.mask[i]) << "," << m.component_id[i] << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_report(const std::map<std::string, std::string>& kv, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) out << k << ": " << v << "\n";
    if (!out) throw IoError("write failed: " + path);
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        const auto ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        const auto vb = val.find_first_not_of(" \t");
        val = vb == std::string::npos ? "" : val.substr(vb);
        if (key.empty())
            throw IoError(path + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw IoError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = val;
    }
    return kv;
}

void write_kv_file(const std::map<std::string, std::string>& kv, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace convlab

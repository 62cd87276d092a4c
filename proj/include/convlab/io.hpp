#pragma once

#include "convlab/grid.hpp"
#include "convlab/moments.hpp"
#include "convlab/support.hpp"

#include <map>
#include <string>

namespace convlab {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// GridFn CSV: "# gridfn d=<d> N=<n> step=<step> domain=freq|space" then
// header "i0[,i1[,i2]],re,im" and one row per node.
void write_gridfn_csv(const GridFn& f, const std::string& path);
GridFn read_gridfn_csv(const std::string& path);

// Sample CSV: header z1..zd[,x1..xd][,y][,y2], no index column.
void write_sample_csv(const Sample& s, const std::string& path);
Sample read_sample_csv(const std::string& path);

// Mask CSV: i0[,i1[,i2]],in_mask,component_id.
void write_mask_csv(const SupportMask& m, const std::string& path);

// Plain key:value report, one per line, keys sorted.
void write_report(const std::map<std::string, std::string>& kv, const std::string& path);

// Flat key=value config/meta with '#' comments. Unknown-key checking is the
// caller's job; parse errors carry file:line.
std::map<std::string, std::string> read_kv_file(const std::string& path);
void write_kv_file(const std::map<std::string, std::string>& kv, const std::string& path);

std::string format_double(double v);

}  // namespace convlab

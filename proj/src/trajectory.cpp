#include "dynamix/trajectory.hpp"

#include "dynamix/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dynamix {

bool Trajectory::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::vector<double> Trajectory::dimension(int dim) const {
    if (dim < 0 || dim >= rows) throw argument_error("trajectory dimension out of range");
    return std::vector<double>(row(dim), row(dim) + cols);
}

Trajectory Trajectory::slice_cols(int first, int count) const {
    if (first < 0 || count < 0 || first + count > cols)
        throw argument_error("trajectory column slice out of range");
    Trajectory out(rows, count, dt, name);
    for (int i = 0; i < rows; ++i) {
        const double* src = row(i) + first;
        std::copy(src, src + count, out.row(i));
    }
    return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot open for writing: " + path);
    for (int i = 0; i < traj.rows; ++i) {
        out << (i ? "," : "") << "dim" << i;
    }
    out << "\n";
    char buf[40];
    for (int t = 0; t < traj.cols; ++t) {
        for (int i = 0; i < traj.rows; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", traj.at(i, t));
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw format_error("write failed: " + path);
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw format_error("empty csv: " + path);
    int n = 1;
    for (char c : line) {
        if (c == ',') ++n;
    }
    std::vector<std::vector<double>> cols_by_step;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<double> vals;
        vals.reserve(n);
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                vals.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw format_error("bad numeric cell '" + tok + "' in " + path);
            }
        }
        if (static_cast<int>(vals.size()) != n)
            throw format_error("inconsistent column count in " + path);
        cols_by_step.push_back(std::move(vals));
    }
    if (cols_by_step.empty()) throw format_error("csv has no data rows: " + path);
    Trajectory traj(n, static_cast<int>(cols_by_step.size()));
    for (int t = 0; t < traj.cols; ++t)
        for (int i = 0; i < n; ++i) traj.at(i, t) = cols_by_step[t][i];
    return traj;
}

} // namespace dynamix

#include "dplab/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dplab {

void Dataset::validate() const {
    if (inputs.rows() < 1) throw std::invalid_argument("Dataset: need at least one sample");
    if (targets.size() != inputs.rows())
        throw std::invalid_argument("Dataset: target count does not match input count");
    if (!inputs.allFinite() || !targets.allFinite())
        throw std::invalid_argument("Dataset: non-finite entries");
}

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);

    // Header: z0,...,z{d-1},y
    int d = 0;
    {
        std::stringstream header(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(header, col, ',')) cols.push_back(col);
        if (cols.empty() || cols.back() != "y")
            throw std::runtime_error("dataset header must end with column 'y'");
        d = static_cast<int>(cols.size()) - 1;
        for (int i = 0; i < d; ++i)
            if (cols[i] != "z" + std::to_string(i))
                throw std::runtime_error("dataset header: expected column z" + std::to_string(i));
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<int>(row.size()) != d + 1)
            throw std::runtime_error("dataset row has wrong column count");
        rows.push_back(std::move(row));
    }

    Dataset data;
    data.inputs.resize(static_cast<long>(rows.size()), d);
    data.targets.resize(static_cast<long>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < d; ++j) data.inputs(static_cast<long>(i), j) = rows[i][j];
        data.targets[static_cast<long>(i)] = rows[i][d];
    }
    data.validate();
    return data;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    out.precision(17);
    for (int j = 0; j < data.dim(); ++j) out << "z" << j << ",";
    out << "y\n";
    for (int i = 0; i < data.size(); ++i) {
        for (int j = 0; j < data.dim(); ++j) out << data.inputs(i, j) << ",";
        out << data.targets[i] << "\n";
    }
}

}  // namespace dplab

#include "dplab/record.hpp"

#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace dplab {

void save_record_csv(const TrajectoryRecord& rec, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open " + csv_path + " for writing");
    out << std::setprecision(17);

    const int m = rec.predictors.empty() ? 0 : static_cast<int>(rec.predictors.front().size());
    const int tracked = rec.tracked.empty() ? 0 : static_cast<int>(rec.tracked.front().rows());
    const int p = rec.tracked.empty() ? 0 : static_cast<int>(rec.tracked.front().cols());

    out << "step,time,loss";
    for (int j = 0; j < m; ++j) out << ",f" << j;
    for (int i = 0; i < tracked; ++i)
        for (int j = 0; j < p; ++j) out << ",x" << i << "_" << j;
    out << "\n";

    for (std::size_t k = 0; k < rec.size(); ++k) {
        out << rec.steps[k] << "," << rec.times[k] << "," << rec.losses[k];
        for (int j = 0; j < m; ++j) out << "," << rec.predictors[k][j];
        for (int i = 0; i < tracked; ++i)
            for (int j = 0; j < p; ++j) out << "," << rec.tracked[k](i, j);
        out << "\n";
    }
}

void save_record_sidecar(const TrajectoryRecord& rec, const std::string& json_path) {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot open " + json_path + " for writing");
    out << rec.sidecar.dump(2) << "\n";
}

}  // namespace dplab

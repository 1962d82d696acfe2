#pragma once

#include <string>
#include <vector>

#include "mctdvp/model.hpp"
#include "mctdvp/mps.hpp"

namespace mctdvp {

enum class ObservableKind { SzProfile, SxProfile, Energy, TwoPoint, Tomography };

struct ObservableSpec {
    ObservableKind kind;
    std::string op_name;  // two_point only: sx | sy | sz
    int ref_site = 0;     // two_point only, 1-based

    // Parses "sz_profile", "sx_profile", "energy", "two_point:sx@8",
    // "tomography".
    static ObservableSpec parse(const std::string& text);
    std::string to_string() const;
    // Grouping key used for output file names, e.g. "two_point_sx_8".
    std::string file_stem() const;
};

// A spec list expanded against a concrete model into flat scalar channels.
class ObservableSet {
public:
    ObservableSet(std::vector<ObservableSpec> specs, const LindbladModel& model,
                  std::int64_t dense_cap = kDefaultDenseCap);

    const std::vector<ObservableSpec>& specs() const { return specs_; }
    const std::vector<std::string>& labels() const { return labels_; }
    int n_channels() const { return static_cast<int>(labels_.size()); }
    // Half-open channel range [first, last) belonging to spec i.
    std::pair<int, int> channel_range(int spec_index) const;

    std::vector<Complex> evaluate_mps(const MpsState& state) const;
    std::vector<Complex> evaluate_rho(const ComplexMatrix& rho) const;

private:
    std::vector<ObservableSpec> specs_;
    std::vector<std::string> labels_;
    std::vector<int> spec_offsets_;  // size specs_+1
    LindbladModel model_;
    std::int64_t dense_cap_;
    mutable std::vector<ComplexMatrix> dense_ops_;  // lazily built, rho path
    void build_dense_ops() const;
};

struct ObservableSeries {
    std::vector<double> times;
    std::vector<std::string> labels;
    // values[t][c]: channel c at time index t.
    std::vector<std::vector<Complex>> values;
};

}  // namespace mctdvp

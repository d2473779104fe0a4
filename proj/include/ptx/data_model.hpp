#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ptx {

// One row of the combined sample. Trial rows (r=1) carry assignment a,
// receipt c, and outcome y; target rows (r=0) carry covariates only.
struct ObservedUnit {
  int r = 0;
  std::optional<int> a;
  std::optional<int> c;
  std::optional<double> y;
  std::vector<double> x;
};

// Immutable combined trial+target dataset stored column-wise. Row order is
// significant: fold assignment and RNG reproducibility depend on it.
class ValidatedDataset {
public:
  // Validates the presence rules and population invariants.
  // Throws ConsistencyError / EmptyPopulationError / DimensionError.
  static ValidatedDataset create(const std::vector<ObservedUnit>& units);

  // Column-wise constructor used by the simulators. a/c entries of target
  // rows are ignored; y of target rows must be NaN or is ignored likewise.
  static ValidatedDataset from_columns(std::vector<std::uint8_t> r,
                                       std::vector<std::uint8_t> a,
                                       std::vector<std::uint8_t> c,
                                       std::vector<double> y,
                                       std::vector<double> x_flat,
                                       std::size_t p);

  std::size_t n() const { return r_.size(); }
  std::size_t p() const { return p_; }
  std::size_t n_trial() const { return n_trial_; }
  std::size_t n_target() const { return n_target_; }

  int r(std::size_t i) const { return r_[i]; }
  int a(std::size_t i) const { return a_[i]; }  // valid only when r(i)==1
  int c(std::size_t i) const { return c_[i]; }  // valid only when r(i)==1
  double y(std::size_t i) const { return y_[i]; }
  std::span<const double> x(std::size_t i) const {
    return {x_.data() + i * p_, p_};
  }

  ObservedUnit unit(std::size_t i) const;

  // New dataset holding rows[0], rows[1], ... in that order (duplicates
  // allowed, used by the bootstrap). Re-validates population invariants.
  ValidatedDataset select(const std::vector<std::size_t>& rows) const;

private:
  ValidatedDataset() = default;
  void finalize();  // counts populations, checks invariants

  std::vector<std::uint8_t> r_, a_, c_;
  std::vector<double> y_;
  std::vector<double> x_;  // n x p row-major
  std::size_t p_ = 0;
  std::size_t n_trial_ = 0, n_target_ = 0;
};

// CSV schema is exactly `r,a,c,y,x1,...,xp`; a/c/y cells empty iff r=0.
// Accepts LF and CRLF line endings. Error messages carry 1-based data-row
// indices. Throws SchemaError / ConsistencyError / EmptyPopulationError.
ValidatedDataset load_dataset(std::istream& in);
ValidatedDataset load_dataset_file(const std::string& path);

// Writes floating point at 17 significant digits so load(write(d)) == d.
void write_csv(const ValidatedDataset& dataset, std::ostream& out);

struct DatasetSummary {
  std::size_t n_trial = 0;
  std::size_t n_target = 0;
  // counts[a][c] over trial rows
  std::size_t arm_counts[2][2] = {{0, 0}, {0, 0}};
  std::vector<double> x_mean, x_min, x_max;
};

DatasetSummary summarize(const ValidatedDataset& dataset);

}  // namespace ptx

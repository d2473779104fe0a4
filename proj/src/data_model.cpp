#include "ptx/data_model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ptx/errors.hpp"

namespace ptx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double parse_double(std::string_view cell, std::size_t row, const char* col) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw SchemaError("row " + std::to_string(row) + ": non-numeric cell in column " +
                      col + ": '" + std::string(cell) + "'");
  }
  return v;
}

int parse_binary(std::string_view cell, std::size_t row, const char* col) {
  double v = parse_double(cell, row, col);
  if (v != 0.0 && v != 1.0) {
    throw SchemaError("row " + std::to_string(row) + ": column " + col +
                      " must be 0 or 1, got '" + std::string(cell) + "'");
  }
  return static_cast<int>(v);
}

void split_line(const std::string& line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.emplace_back(line.data() + start, line.size() - start);
      return;
    }
    out.emplace_back(line.data() + start, comma - start);
    start = comma + 1;
  }
}

}  // namespace

void ValidatedDataset::finalize() {
  n_trial_ = 0;
  n_target_ = 0;
  std::size_t arm1 = 0, arm0 = 0;
  for (std::size_t i = 0; i < r_.size(); ++i) {
    if (r_[i]) {
      ++n_trial_;
      if (a_[i])
        ++arm1;
      else
        ++arm0;
    } else {
      ++n_target_;
    }
  }
  if (n_trial_ == 0) throw EmptyPopulationError("no trial rows (r=1)");
  if (n_target_ == 0) throw EmptyPopulationError("no target rows (r=0)");
  if (arm1 == 0) throw EmptyPopulationError("treated arm (a=1) absent from trial rows");
  if (arm0 == 0) throw EmptyPopulationError("control arm (a=0) absent from trial rows");
}

ValidatedDataset ValidatedDataset::create(const std::vector<ObservedUnit>& units) {
  ValidatedDataset d;
  if (units.empty()) throw EmptyPopulationError("dataset has no rows");
  d.p_ = units.front().x.size();
  const std::size_t n = units.size();
  d.r_.resize(n);
  d.a_.resize(n);
  d.c_.resize(n);
  d.y_.resize(n);
  d.x_.resize(n * d.p_);
  for (std::size_t i = 0; i < n; ++i) {
    const ObservedUnit& u = units[i];
    const std::size_t row = i + 1;
    if (u.r != 0 && u.r != 1)
      throw ConsistencyError("row " + std::to_string(row) + ": r must be 0 or 1");
    if (u.x.size() != d.p_)
      throw DimensionError("row " + std::to_string(row) + ": expected " +
                           std::to_string(d.p_) + " covariates, got " +
                           std::to_string(u.x.size()));
    if (u.r == 1) {
      if (!u.a || !u.c || !u.y)
        throw ConsistencyError("row " + std::to_string(row) +
                               ": trial row missing a, c, or y");
      if ((*u.a != 0 && *u.a != 1) || (*u.c != 0 && *u.c != 1))
        throw ConsistencyError("row " + std::to_string(row) + ": a and c must be 0 or 1");
      if (!std::isfinite(*u.y))
        throw ConsistencyError("row " + std::to_string(row) + ": non-finite outcome");
    } else {
      if (u.a || u.c || u.y)
        throw ConsistencyError("row " + std::to_string(row) +
                               ": target row carries a, c, or y");
    }
    for (double v : u.x) {
      if (!std::isfinite(v))
        throw ConsistencyError("row " + std::to_string(row) + ": non-finite covariate");
    }
    d.r_[i] = static_cast<std::uint8_t>(u.r);
    d.a_[i] = static_cast<std::uint8_t>(u.r == 1 ? *u.a : 0);
    d.c_[i] = static_cast<std::uint8_t>(u.r == 1 ? *u.c : 0);
    d.y_[i] = u.r == 1 ? *u.y : kNaN;
    std::copy(u.x.begin(), u.x.end(), d.x_.begin() + i * d.p_);
  }
  d.finalize();
  return d;
}

ValidatedDataset ValidatedDataset::from_columns(std::vector<std::uint8_t> r,
                                                std::vector<std::uint8_t> a,
                                                std::vector<std::uint8_t> c,
                                                std::vector<double> y,
                                                std::vector<double> x_flat,
                                                std::size_t p) {
  ValidatedDataset d;
  const std::size_t n = r.size();
  if (n == 0) throw EmptyPopulationError("dataset has no rows");
  if (a.size() != n || c.size() != n || y.size() != n || x_flat.size() != n * p)
    throw DimensionError("column lengths disagree");
  d.r_ = std::move(r);
  d.a_ = std::move(a);
  d.c_ = std::move(c);
  d.y_ = std::move(y);
  d.x_ = std::move(x_flat);
  d.p_ = p;
  for (std::size_t i = 0; i < n; ++i) {
    if (!d.r_[i]) {
      d.a_[i] = 0;
      d.c_[i] = 0;
      d.y_[i] = kNaN;
    }
  }
  d.finalize();
  return d;
}

ObservedUnit ValidatedDataset::unit(std::size_t i) const {
  ObservedUnit u;
  u.r = r_[i];
  if (u.r == 1) {
    u.a = a_[i];
    u.c = c_[i];
    u.y = y_[i];
  }
  auto xi = x(i);
  u.x.assign(xi.begin(), xi.end());
  return u;
}

ValidatedDataset ValidatedDataset::select(const std::vector<std::size_t>& rows) const {
  ValidatedDataset d;
  d.p_ = p_;
  const std::size_t m = rows.size();
  d.r_.resize(m);
  d.a_.resize(m);
  d.c_.resize(m);
  d.y_.resize(m);
  d.x_.resize(m * p_);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = rows[k];
    d.r_[k] = r_[i];
    d.a_[k] = a_[i];
    d.c_[k] = c_[i];
    d.y_[k] = y_[i];
    std::copy(x_.begin() + i * p_, x_.begin() + (i + 1) * p_, d.x_.begin() + k * p_);
  }
  d.finalize();
  return d;
}

ValidatedDataset load_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // strip a UTF-8 BOM if present
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }

  std::vector<std::string_view> cells;
  split_line(line, cells);
  if (cells.size() < 5 || cells[0] != "r" || cells[1] != "a" || cells[2] != "c" ||
      cells[3] != "y") {
    throw SchemaError("bad header: expected r,a,c,y,x1,...,xp");
  }
  const std::size_t p = cells.size() - 4;
  for (std::size_t j = 0; j < p; ++j) {
    if (cells[4 + j] != "x" + std::to_string(j + 1))
      throw SchemaError("bad header: covariate column " + std::to_string(j + 1) +
                        " must be named x" + std::to_string(j + 1));
  }

  std::vector<ObservedUnit> units;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    split_line(line, cells);
    if (cells.size() != p + 4)
      throw SchemaError("row " + std::to_string(row) + ": expected " +
                        std::to_string(p + 4) + " cells, got " +
                        std::to_string(cells.size()));
    ObservedUnit u;
    u.r = parse_binary(cells[0], row, "r");
    if (u.r == 1) {
      if (cells[1].empty() || cells[2].empty() || cells[3].empty())
        throw ConsistencyError("row " + std::to_string(row) +
                               ": trial row with missing a, c, or y");
      u.a = parse_binary(cells[1], row, "a");
      u.c = parse_binary(cells[2], row, "c");
      u.y = parse_double(cells[3], row, "y");
    } else {
      if (!cells[1].empty() || !cells[2].empty() || !cells[3].empty())
        throw ConsistencyError("row " + std::to_string(row) +
                               ": target row carries a, c, or y");
    }
    u.x.resize(p);
    for (std::size_t j = 0; j < p; ++j)
      u.x[j] = parse_double(cells[4 + j], row, ("x" + std::to_string(j + 1)).c_str());
    units.push_back(std::move(u));
  }
  try {
    return ValidatedDataset::create(units);
  } catch (const DimensionError& e) {
    throw SchemaError(e.what());
  }
}

ValidatedDataset load_dataset_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SchemaError("cannot open file: " + path);
  return load_dataset(f);
}

void write_csv(const ValidatedDataset& dataset, std::ostream& out) {
  out << "r,a,c,y";
  for (std::size_t j = 1; j <= dataset.p(); ++j) out << ",x" << j;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    if (dataset.r(i)) {
      out << "1," << dataset.a(i) << ',' << dataset.c(i) << ',';
      put(dataset.y(i));
    } else {
      out << "0,,,";
    }
    for (double v : dataset.x(i)) {
      out << ',';
      put(v);
    }
    out << "\n";
  }
}

DatasetSummary summarize(const ValidatedDataset& dataset) {
  DatasetSummary s;
  s.n_trial = dataset.n_trial();
  s.n_target = dataset.n_target();
  const std::size_t p = dataset.p();
  s.x_mean.assign(p, 0.0);
  s.x_min.assign(p, std::numeric_limits<double>::infinity());
  s.x_max.assign(p, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    if (dataset.r(i)) ++s.arm_counts[dataset.a(i)][dataset.c(i)];
    auto xi = dataset.x(i);
    for (std::size_t j = 0; j < p; ++j) {
      s.x_mean[j] += xi[j];
      s.x_min[j] = std::min(s.x_min[j], xi[j]);
      s.x_max[j] = std::max(s.x_max[j], xi[j]);
    }
  }
  for (std::size_t j = 0; j < p; ++j) s.x_mean[j] /= static_cast<double>(dataset.n());
  return s;
}

}  // namespace ptx

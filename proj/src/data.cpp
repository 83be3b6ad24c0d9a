#include "evfuse/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "evfuse/error.hpp"

namespace evfuse::data {
namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<std::size_t> parse_index(std::string_view text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Parses "v<view>_<dim>" header names and checks they are sequential.
std::vector<std::size_t> dims_from_header(const std::vector<std::string_view>& fields) {
  if (fields.size() < 3 || fields[0] != "id" || fields[1] != "label") {
    throw ParseError("header must start with id,label followed by view columns", 1);
  }
  std::vector<std::size_t> dims;
  for (std::size_t i = 2; i < fields.size(); ++i) {
    const std::string_view name = fields[i];
    const std::size_t underscore = name.find('_');
    if (name.size() < 4 || name[0] != 'v' || underscore == std::string_view::npos) {
      throw ParseError("bad view column name '" + std::string(name) + "'", 1);
    }
    const auto view = parse_index(name.substr(1, underscore - 1));
    const auto dim = parse_index(name.substr(underscore + 1));
    if (!view || !dim) throw ParseError("bad view column name '" + std::string(name) + "'", 1);
    if (*view == dims.size() && *dim == 0) {
      dims.push_back(1);
    } else if (!dims.empty() && *view + 1 == dims.size() && *dim == dims.back()) {
      ++dims.back();
    } else {
      throw ParseError("view columns out of order at '" + std::string(name) + "'", 1);
    }
  }
  return dims;
}

MultiViewDataset read_csv(const std::filesystem::path& path, std::size_t num_classes,
                          std::optional<std::vector<std::size_t>> expected_dims) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1);
  strip_cr(line);
  const std::vector<std::size_t> dims = dims_from_header(split_commas(line));
  if (expected_dims && *expected_dims != dims) {
    throw ParseError("header view layout does not match the expected dimensions", 1);
  }
  const std::size_t width = 2 + std::accumulate(dims.begin(), dims.end(), std::size_t{0});

  std::vector<MultiViewSample> samples;
  std::size_t max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    MultiViewSample s;
    s.id = std::string(fields[0]);
    const auto label = parse_index(fields[1]);
    if (!label) throw ParseError("bad label '" + std::string(fields[1]) + "'", line_no);
    if (num_classes != 0 && *label >= num_classes) {
      throw ParseError("label " + std::to_string(*label) + " out of range", line_no);
    }
    s.label = *label;
    max_label = std::max(max_label, *label);
    std::size_t col = 2;
    s.views.resize(dims.size());
    for (std::size_t v = 0; v < dims.size(); ++v) {
      s.views[v].resize(dims[v]);
      for (std::size_t d = 0; d < dims[v]; ++d, ++col) {
        const auto value = parse_double(fields[col]);
        if (!value) {
          throw ParseError("bad number '" + std::string(fields[col]) + "' in column " +
                               std::to_string(col + 1),
                           line_no);
        }
        s.views[v][d] = *value;
      }
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ParseError("no samples in " + path.string(), line_no);
  const std::size_t k = num_classes != 0 ? num_classes : std::max<std::size_t>(max_label + 1, 2);
  return MultiViewDataset(std::move(samples), k, dims, path.string());
}

}  // namespace

// ---------------------------------------------------------------------------

MultiViewDataset::MultiViewDataset(std::vector<MultiViewSample> samples, std::size_t num_classes,
                                   std::vector<std::size_t> view_dims, std::string provenance)
    : samples_(std::move(samples)),
      num_classes_(num_classes),
      view_dims_(std::move(view_dims)),
      provenance_(std::move(provenance)) {
  if (samples_.empty()) throw ValidationError("MultiViewDataset: no samples");
  if (num_classes_ < 2) throw ValidationError("MultiViewDataset: need at least 2 classes");
  if (view_dims_.empty()) throw ValidationError("MultiViewDataset: need at least one view");
  for (const auto& s : samples_) {
    if (s.label >= num_classes_) {
      throw ValidationError("MultiViewDataset: sample '" + s.id + "' has label " +
                            std::to_string(s.label) + " >= K");
    }
    if (s.views.size() != view_dims_.size()) {
      throw ValidationError("MultiViewDataset: sample '" + s.id + "' has wrong view count");
    }
    for (std::size_t v = 0; v < view_dims_.size(); ++v) {
      if (s.views[v].size() != view_dims_[v]) {
        throw ValidationError("MultiViewDataset: sample '" + s.id + "' view " +
                              std::to_string(v) + " has wrong dimension");
      }
    }
  }
}

std::vector<std::size_t> MultiViewDataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label);
  return out;
}

std::vector<std::size_t> MultiViewDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (const auto& s : samples_) ++counts[s.label];
  return counts;
}

// ---------------------------------------------------------------------------

GeneratorSpec GeneratorSpec::blobs(std::size_t num_classes, std::size_t num_views,
                                   std::size_t dim, double separation, double sd,
                                   std::size_t n_per_class, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.num_classes = num_classes;
  spec.view_dims.assign(num_views, dim);
  spec.counts.assign(num_classes, n_per_class);
  spec.seed = seed;
  const double centre = 0.5 * static_cast<double>(num_classes - 1);
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<std::vector<double>> per_view(num_views, std::vector<double>(dim, 0.0));
    for (auto& mean : per_view) {
      if (dim > 0) mean[0] = (static_cast<double>(c) - centre) * separation;
    }
    spec.means.push_back(std::move(per_view));
    spec.scales.emplace_back(num_views, sd);
  }
  return spec;
}

void GeneratorSpec::validate() const {
  if (num_classes < 2) throw ValidationError("GeneratorSpec: need at least 2 classes");
  if (view_dims.empty()) throw ValidationError("GeneratorSpec: need at least one view");
  if (means.size() != num_classes || scales.size() != num_classes ||
      counts.size() != num_classes) {
    throw ValidationError("GeneratorSpec: means/scales/counts must have one entry per class");
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (means[c].size() != view_dims.size() || scales[c].size() != view_dims.size()) {
      throw ValidationError("GeneratorSpec: class " + std::to_string(c) +
                            " needs one mean and scale per view");
    }
    for (std::size_t v = 0; v < view_dims.size(); ++v) {
      if (view_dims[v] == 0) throw ValidationError("GeneratorSpec: zero view dimension");
      if (means[c][v].size() != view_dims[v]) {
        throw ValidationError("GeneratorSpec: mean of class " + std::to_string(c) + " view " +
                              std::to_string(v) + " has wrong dimension");
      }
      if (!std::isfinite(scales[c][v]) || scales[c][v] < 0.0) {
        throw ValidationError("GeneratorSpec: scales must be finite and >= 0");
      }
    }
  }
  if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 0) {
    throw ValidationError("GeneratorSpec: no samples requested");
  }
}

namespace {

MultiViewDataset generate(const GeneratorSpec& spec,
                          const std::vector<std::vector<double>>& offsets,
                          const std::string& provenance) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<MultiViewSample> samples;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.counts[c]; ++i) {
      MultiViewSample s;
      s.label = c;
      s.views.resize(spec.view_dims.size());
      for (std::size_t v = 0; v < spec.view_dims.size(); ++v) {
        s.views[v].resize(spec.view_dims[v]);
        for (std::size_t d = 0; d < spec.view_dims[v]; ++d) {
          s.views[v][d] = spec.means[c][v][d] + offsets[v][d] + spec.scales[c][v] * normal(rng);
        }
      }
      samples.push_back(std::move(s));
    }
  }
  std::shuffle(samples.begin(), samples.end(), rng);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].id = spec.id_prefix + std::to_string(i);
  }
  return MultiViewDataset(std::move(samples), spec.num_classes, spec.view_dims, provenance);
}

}  // namespace

MultiViewDataset gen_synthetic(const GeneratorSpec& spec) {
  std::vector<std::vector<double>> zero;
  for (std::size_t d : spec.view_dims) zero.emplace_back(d, 0.0);
  return generate(spec, zero, "synthetic seed=" + std::to_string(spec.seed));
}

std::vector<double> ood_direction(const GeneratorSpec& spec, std::size_t view) {
  spec.validate();
  const std::size_t dim = spec.view_dims.at(view);
  auto norm = [](const std::vector<double>& x) {
    return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
  };
  auto project_out = [](std::vector<double>& x, const std::vector<std::vector<double>>& basis) {
    for (const auto& b : basis) {
      const double coeff = std::inner_product(x.begin(), x.end(), b.begin(), 0.0);
      for (std::size_t d = 0; d < x.size(); ++d) x[d] -= coeff * b[d];
    }
  };
  // Orthonormal basis of the class-mean differences.
  std::vector<std::vector<double>> basis;
  for (std::size_t c = 1; c < spec.num_classes; ++c) {
    std::vector<double> diff(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      diff[d] = spec.means[c][view][d] - spec.means[0][view][d];
    }
    project_out(diff, basis);
    const double n = norm(diff);
    if (n > 1e-12) {
      for (double& x : diff) x /= n;
      basis.push_back(std::move(diff));
    }
  }
  // First axis, from the last one backwards, with a component outside the span.
  for (std::size_t j = dim; j-- > 0;) {
    std::vector<double> axis(dim, 0.0);
    axis[j] = 1.0;
    project_out(axis, basis);
    const double n = norm(axis);
    if (n > 1e-6) {
      for (double& x : axis) x /= n;
      return axis;
    }
  }
  throw ValidationError("ood_direction: view " + std::to_string(view) +
                        " has no direction orthogonal to the class separation");
}

MultiViewDataset gen_ood(const GeneratorSpec& spec, double shift) {
  if (!std::isfinite(shift) || shift < 0.0) {
    throw ValidationError("gen_ood: shift must be finite and >= 0");
  }
  std::vector<std::vector<double>> offsets;
  for (std::size_t v = 0; v < spec.view_dims.size(); ++v) {
    if (shift == 0.0) {
      offsets.emplace_back(spec.view_dims[v], 0.0);
      continue;
    }
    std::vector<double> dir = ood_direction(spec, v);
    for (double& x : dir) x *= shift;
    offsets.push_back(std::move(dir));
  }
  std::ostringstream prov;
  prov << "synthetic-ood seed=" << spec.seed << " shift=" << shift;
  return generate(spec, offsets, prov.str());
}

MultiViewDataset resample_class_ratio(const MultiViewDataset& ds, std::span<const double> ratio,
                                      std::uint64_t seed, std::size_t total) {
  const std::size_t k = ds.num_classes();
  if (ratio.size() != k) {
    throw ValidationError("resample_class_ratio: ratio needs " + std::to_string(k) + " entries");
  }
  double sum = 0.0;
  for (double r : ratio) {
    if (!std::isfinite(r) || r <= 0.0) {
      throw ValidationError("resample_class_ratio: every class proportion must be > 0");
    }
    sum += r;
  }
  std::vector<double> share(ratio.begin(), ratio.end());
  for (double& r : share) r /= sum;

  const std::vector<std::size_t> available = ds.class_counts();
  if (total == 0) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      best = std::min(best, static_cast<double>(available[c]) / share[c]);
    }
    total = static_cast<std::size_t>(std::floor(best + 1e-9));
  }
  std::vector<std::size_t> wanted(k);
  for (std::size_t c = 0; c < k; ++c) {
    wanted[c] = static_cast<std::size_t>(std::llround(share[c] * static_cast<double>(total)));
    if (wanted[c] == 0 || wanted[c] > available[c]) {
      throw ValidationError("resample_class_ratio: class " + std::to_string(c) + " needs " +
                            std::to_string(wanted[c]) + " samples, " +
                            std::to_string(available[c]) + " available");
    }
  }

  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds[i].label].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < k; ++c) {
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    keep.insert(keep.end(), by_class[c].begin(), by_class[c].begin() + wanted[c]);
  }
  std::sort(keep.begin(), keep.end());
  std::vector<MultiViewSample> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(ds[i]);
  return MultiViewDataset(std::move(out), k,
                          std::vector<std::size_t>(ds.view_dims().begin(), ds.view_dims().end()),
                          ds.provenance() + " resampled");
}

// ---------------------------------------------------------------------------

MultiViewDataset load_csv(const std::filesystem::path& path, std::size_t num_classes,
                          std::size_t num_views, std::span<const std::size_t> dims) {
  if (dims.size() != num_views) {
    throw ValidationError("load_csv: dims must list one entry per view");
  }
  if (num_classes < 2) throw ValidationError("load_csv: need at least 2 classes");
  return read_csv(path, num_classes, std::vector<std::size_t>(dims.begin(), dims.end()));
}

MultiViewDataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
  return read_csv(path, num_classes, std::nullopt);
}

void write_csv(const MultiViewDataset& ds, std::ostream& out) {
  out << "id,label";
  for (std::size_t v = 0; v < ds.num_views(); ++v) {
    for (std::size_t d = 0; d < ds.view_dims()[v]; ++d) out << ",v" << v << '_' << d;
  }
  out << '\n';
  for (const auto& s : ds.samples()) {
    out << s.id << ',' << s.label;
    for (const auto& view : s.views) {
      for (double x : view) out << ',' << format_double(x);
    }
    out << '\n';
  }
}

void save_csv(const MultiViewDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_csv(ds, out);
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

Grid2D::Grid2D(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ValidationError("Grid2D: expected " + std::to_string(rows_ * cols_) + " values, got " +
                          std::to_string(values_.size()));
  }
}

Grid2D::Grid2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Grid2D Grid2D::crop(std::size_t top, std::size_t left, std::size_t height,
                    std::size_t width) const {
  if (top + height > rows_ || left + width > cols_) {
    throw ValidationError("Grid2D::crop: window exceeds grid bounds");
  }
  Grid2D out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = (*this)(top + r, left + c);
  }
  return out;
}

ViewGeometry::ViewGeometry(std::size_t roi_, std::size_t window_, std::size_t stride_)
    : roi(roi_), window(window_), stride(stride_) {
  if (window == 0 || stride == 0) {
    throw ValidationError("ViewGeometry: window and stride must be >= 1");
  }
  if (window > roi) throw ValidationError("ViewGeometry: window larger than roi");
  if ((roi - window) % stride != 0) {
    throw ValidationError("ViewGeometry: (roi - window) must be divisible by stride");
  }
}

ViewPatches extract_views(const Grid2D& grid, const ViewGeometry& geom,
                          std::optional<GridPoint> center) {
  const GridPoint c = center.value_or(GridPoint{grid.rows() / 2, grid.cols() / 2});
  const std::size_t half = geom.roi / 2;
  if (c.row < half || c.col < half || c.row - half + geom.roi > grid.rows() ||
      c.col - half + geom.roi > grid.cols()) {
    throw ValidationError("extract_views: ROI of size " + std::to_string(geom.roi) +
                          " centred at (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                          ") does not fit in a " + std::to_string(grid.rows()) + "x" +
                          std::to_string(grid.cols()) + " grid");
  }
  ViewPatches out;
  out.global = grid.crop(c.row - half, c.col - half, geom.roi, geom.roi);
  const std::size_t n = geom.windows_per_side();
  out.locals.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.locals.push_back(
          out.global.crop(i * geom.stride, j * geom.stride, geom.window, geom.window));
    }
  }
  return out;
}

Grid2D with_cutout(const Grid2D& grid, std::size_t size, std::uint64_t seed) {
  if (size > grid.rows() || size > grid.cols()) {
    throw ValidationError("with_cutout: cutout larger than grid");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> row(0, grid.rows() - size);
  std::uniform_int_distribution<std::size_t> col(0, grid.cols() - size);
  const std::size_t top = row(rng);
  const std::size_t left = col(rng);
  Grid2D out = grid;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) out(top + r, left + c) = 0.0;
  }
  return out;
}

Grid2D load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    std::size_t count = 0;
    while (fields >> token) {
      const auto v = parse_double(token);
      if (!v) throw ParseError("bad number '" + token + "'", line_no);
      values.push_back(*v);
      ++count;
    }
    if (count == 0) continue;
    if (rows == 0) cols = count;
    if (count != cols) {
      throw ParseError("expected " + std::to_string(cols) + " values, got " +
                           std::to_string(count),
                       line_no);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("empty grid file " + path.string(), line_no);
  return Grid2D(rows, cols, std::move(values));
}

void save_grid(const Grid2D& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      if (c != 0) out << ' ';
      out << format_double(grid(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace evfuse::data

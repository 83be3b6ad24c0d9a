#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evfuse::data {

struct MultiViewSample {
  std::vector<std::vector<double>> views;
  std::size_t label = 0;
  std::string id;

  friend bool operator==(const MultiViewSample&, const MultiViewSample&) = default;
};

// Homogeneous, nonempty collection of labelled multi-view samples.
class MultiViewDataset {
 public:
  MultiViewDataset(std::vector<MultiViewSample> samples, std::size_t num_classes,
                   std::vector<std::size_t> view_dims, std::string provenance = {});

  std::span<const MultiViewSample> samples() const noexcept { return samples_; }
  const MultiViewSample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t num_views() const noexcept { return view_dims_.size(); }
  std::span<const std::size_t> view_dims() const noexcept { return view_dims_; }
  const std::string& provenance() const noexcept { return provenance_; }

  std::vector<std::size_t> labels() const;
  std::vector<std::size_t> class_counts() const;

  // Equality ignores provenance.
  friend bool operator==(const MultiViewDataset& a, const MultiViewDataset& b) {
    return a.num_classes_ == b.num_classes_ && a.view_dims_ == b.view_dims_ &&
           a.samples_ == b.samples_;
  }

 private:
  std::vector<MultiViewSample> samples_;
  std::size_t num_classes_;
  std::vector<std::size_t> view_dims_;
  std::string provenance_;
};

// ---------------------------------------------------------------------------
// Synthetic generators

// Isotropic Gaussian cluster per (class, view).
struct GeneratorSpec {
  std::size_t num_classes = 2;
  std::vector<std::size_t> view_dims;
  // means[c][v] has view_dims[v] entries; scales[c][v] is the cluster sd.
  std::vector<std::vector<std::vector<double>>> means;
  std::vector<std::vector<double>> scales;
  // Samples drawn per class.
  std::vector<std::size_t> counts;
  std::uint64_t seed = 0;
  std::string id_prefix = "s";

  // Classes spaced `separation` apart along the first axis of every view
  // (centred on the origin), all clusters with sd `sd`.
  static GeneratorSpec blobs(std::size_t num_classes, std::size_t num_views, std::size_t dim,
                             double separation, double sd, std::size_t n_per_class,
                             std::uint64_t seed);

  void validate() const;
};

// Samples are drawn class by class and then shuffled with the same seed.
MultiViewDataset gen_synthetic(const GeneratorSpec& spec);

// Same as gen_synthetic, with every mean displaced by `shift` along a unit
// direction orthogonal to all class-mean differences of that view. Needs a
// view dimension larger than the span of the class separation.
MultiViewDataset gen_ood(const GeneratorSpec& spec, double shift);

// Unit direction used by gen_ood for view `view`.
std::vector<double> ood_direction(const GeneratorSpec& spec, std::size_t view);

// Seeded class-ratio subsample. `ratio` is normalised to sum 1 and must be
// strictly positive. With total == 0 the largest achievable subset is taken;
// otherwise exactly `total` samples (class counts rounded). Original sample
// order is preserved.
MultiViewDataset resample_class_ratio(const MultiViewDataset& ds, std::span<const double> ratio,
                                      std::uint64_t seed, std::size_t total = 0);

// ---------------------------------------------------------------------------
// CSV files: header `id,label,v0_0,...,v0_{d0-1},v1_0,...`, one row per sample.

MultiViewDataset load_csv(const std::filesystem::path& path, std::size_t num_classes,
                          std::size_t num_views, std::span<const std::size_t> dims);
// View count and dimensions come from the header. num_classes == 0 infers
// K = max label + 1.
MultiViewDataset load_csv(const std::filesystem::path& path, std::size_t num_classes = 0);
void save_csv(const MultiViewDataset& ds, const std::filesystem::path& path);
void write_csv(const MultiViewDataset& ds, std::ostream& out);

// ---------------------------------------------------------------------------
// Grid inputs and sliding-window views

class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t rows, std::size_t cols, std::vector<double> values);
  Grid2D(std::size_t rows, std::size_t cols, double fill = 0.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  // Row-major contents.
  std::span<const double> values() const noexcept { return values_; }

  Grid2D crop(std::size_t top, std::size_t left, std::size_t height, std::size_t width) const;

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Square ROI split into overlapping square windows.
// Invariant: window <= roi, stride >= 1, (roi - window) % stride == 0.
struct ViewGeometry {
  ViewGeometry(std::size_t roi = 160, std::size_t window = 96, std::size_t stride = 32);

  // Windows per side: (roi - window) / stride + 1.
  std::size_t windows_per_side() const noexcept { return (roi - window) / stride + 1; }
  std::size_t num_local_views() const noexcept { return windows_per_side() * windows_per_side(); }

  std::size_t roi;
  std::size_t window;
  std::size_t stride;
};

struct GridPoint {
  std::size_t row;
  std::size_t col;
};

struct ViewPatches {
  std::vector<Grid2D> locals;  // row-major window order
  Grid2D global;               // the whole ROI
};

// The ROI of side `roi` has its top-left corner at center - roi/2. Default
// center is (rows/2, cols/2).
ViewPatches extract_views(const Grid2D& grid, const ViewGeometry& geom,
                          std::optional<GridPoint> center = std::nullopt);

// Copy of `grid` with a size x size square zeroed at a seeded position.
Grid2D with_cutout(const Grid2D& grid, std::size_t size, std::uint64_t seed);

// Whitespace separated values, one grid row per non-empty line.
Grid2D load_grid(const std::filesystem::path& path);
void save_grid(const Grid2D& grid, const std::filesystem::path& path);

}  // namespace evfuse::data

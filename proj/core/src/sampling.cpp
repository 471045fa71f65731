#include "bbp/sampling.hpp"

#include <algorithm>
#include <set>

namespace bbp {

namespace {

constexpr int kFilterRedraws = 1000;

void check_plan(const SamplingPlan& plan) {
  if (plan.dimension <= 0)
    throw Error(Errc::InvalidInput, "sampling plan needs a positive dimension");
  if (plan.box.size() != static_cast<std::size_t>(plan.dimension))
    throw Error(Errc::InvalidInput, "sampling box must list one interval per variable");
  for (const auto& iv : plan.box)
    if (!(iv.lo < iv.hi))
      throw Error(Errc::InvalidInput, "sampling box contains an empty interval");
  if (plan.sample_count < 2)
    throw Error(Errc::InvalidInput, "sample count must be at least 2");
}

}  // namespace

Matrix draw_base_sample(const SamplingPlan& plan) {
  return draw_base_sample(plan, RowFilter{});
}

Matrix draw_base_sample(const SamplingPlan& plan, const RowFilter& keep_row) {
  check_plan(plan);
  Rng rng(plan.seed);
  Matrix out(static_cast<std::size_t>(plan.sample_count),
             static_cast<std::size_t>(plan.dimension));
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= kFilterRedraws)
        throw Error(Errc::DegenerateData,
                    "row filter rejected " + std::to_string(kFilterRedraws) +
                        " consecutive draws");
      auto row = out.row(r);
      for (int c = 0; c < plan.dimension; ++c)
        row[static_cast<std::size_t>(c)] =
            rng.uniform(plan.box[static_cast<std::size_t>(c)].lo,
                        plan.box[static_cast<std::size_t>(c)].hi);
      if (!keep_row || keep_row(out.row(r))) break;
    }
  }
  return out;
}

std::vector<double> draw_central_anchor(const Box& box, std::span<const int> columns,
                                        Rng& rng) {
  std::vector<double> out;
  out.reserve(columns.size());
  for (int c : columns) {
    if (c < 0 || static_cast<std::size_t>(c) >= box.size())
      throw Error(Errc::InvalidInput, "anchor column outside the box");
    const auto& iv = box[static_cast<std::size_t>(c)];
    const double margin = 0.2 * iv.width();
    out.push_back(rng.uniform(iv.lo + margin, iv.hi - margin));
  }
  return out;
}

FactorSlices build_factor_slices(const Matrix& base, const SeparableStructure& structure,
                                 int block, int factor, std::span<const double> anchor_a,
                                 std::span<const double> anchor_b,
                                 std::span<const double> anchor_g) {
  structure.validate();
  if (base.cols() != static_cast<std::size_t>(structure.dimension))
    throw Error(Errc::InvalidInput, "base sample width does not match the structure");
  if (block < 0 || block >= structure.block_count())
    throw Error(Errc::InvalidInput, "block index out of range");
  const auto& blk = structure.blocks[static_cast<std::size_t>(block)];
  if (factor < 0 || factor >= static_cast<int>(blk.size()))
    throw Error(Errc::InvalidInput, "factor index out of range");

  FactorSlices s;
  s.free_columns = blk[static_cast<std::size_t>(factor)];
  std::sort(s.free_columns.begin(), s.free_columns.end());
  for (int j = 0; j < static_cast<int>(blk.size()); ++j) {
    if (j == factor) continue;
    s.complement_columns.insert(s.complement_columns.end(),
                                blk[static_cast<std::size_t>(j)].begin(),
                                blk[static_cast<std::size_t>(j)].end());
  }
  std::sort(s.complement_columns.begin(), s.complement_columns.end());
  {
    std::set<int> in_block;
    for (const auto& f : blk) in_block.insert(f.begin(), f.end());
    for (int v = 0; v < structure.dimension; ++v)
      if (!in_block.count(v)) s.outer_columns.push_back(v);
  }

  s.single_factor = s.complement_columns.empty();
  if (anchor_a.size() != s.complement_columns.size() ||
      anchor_b.size() != s.complement_columns.size())
    throw Error(Errc::InvalidInput, "anchors must cover the in-block complement");
  if (anchor_g.size() != s.outer_columns.size())
    throw Error(Errc::InvalidInput, "outer anchor must cover all other blocks");
  if (!s.single_factor && std::equal(anchor_a.begin(), anchor_a.end(), anchor_b.begin()))
    throw Error(Errc::InvalidInput, "anchors A and B must differ in at least one coordinate");

  s.anchor_a.assign(anchor_a.begin(), anchor_a.end());
  s.anchor_b.assign(anchor_b.begin(), anchor_b.end());
  s.anchor_g.assign(anchor_g.begin(), anchor_g.end());

  s.x1 = base;
  for (std::size_t r = 0; r < s.x1.rows(); ++r) {
    for (std::size_t j = 0; j < s.complement_columns.size(); ++j)
      s.x1.at(r, static_cast<std::size_t>(s.complement_columns[j])) = s.anchor_a[j];
    for (std::size_t j = 0; j < s.outer_columns.size(); ++j)
      s.x1.at(r, static_cast<std::size_t>(s.outer_columns[j])) = s.anchor_g[j];
  }
  if (s.single_factor) {
    s.x2 = s.x1;
  } else {
    s.x2 = s.x1;
    for (std::size_t r = 0; r < s.x2.rows(); ++r)
      for (std::size_t j = 0; j < s.complement_columns.size(); ++j)
        s.x2.at(r, static_cast<std::size_t>(s.complement_columns[j])) = s.anchor_b[j];
  }
  s.x_train = base.select_columns(s.free_columns);
  return s;
}

DifferenceResponse difference_response(const Oracle& oracle, const FactorSlices& slices) {
  if (!oracle) throw Error(Errc::InvalidInput, "oracle is empty");
  DifferenceResponse out;
  out.single_factor = slices.single_factor;
  out.rows_total = slices.x1.rows();

  const EvalResult f1 = oracle(slices.x1);
  EvalResult f2;
  if (!slices.single_factor) f2 = oracle(slices.x2);

  std::vector<std::size_t> keep;
  keep.reserve(out.rows_total);
  for (std::size_t r = 0; r < out.rows_total; ++r) {
    const bool ok = f1.valid[r] && (slices.single_factor || f2.valid[r]);
    if (ok) keep.push_back(r);
  }
  out.rows_kept = keep.size();
  if (out.rows_kept < 10)
    throw Error(Errc::InsufficientData,
                "only " + std::to_string(out.rows_kept) + " valid rows in the factor slices");

  out.x_train = slices.x_train.select_rows(keep);
  out.f_train.reserve(keep.size());
  for (std::size_t r : keep)
    out.f_train.push_back(slices.single_factor ? f1.values[r] : f1.values[r] - f2.values[r]);
  return out;
}

}  // namespace bbp

#include "mdma/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "mdma/errors.hpp"

namespace mdma {

namespace {

constexpr std::size_t kChunkRows = 512;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s) {
  s = trim(s);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw InvalidArgument("cannot parse number '" + std::string(s) + "' in query");
  return value;
}

}  // namespace

QuerySpec parse_query(std::string_view text) {
  QuerySpec query;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string_view item =
        trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    if (item == "m") {
      query.push_back(VariableQuery::marginalize());
    } else if (item.starts_with("c:")) {
      query.push_back(VariableQuery::cdf(parse_number(item.substr(2))));
    } else if (item.starts_with("d:")) {
      query.push_back(VariableQuery::density(parse_number(item.substr(2))));
    } else if (item.starts_with("given:")) {
      query.push_back(VariableQuery::given(parse_number(item.substr(6))));
    } else {
      throw InvalidArgument("unrecognized query item '" + std::string(item) + "'");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return query;
}

std::string format_query(const QuerySpec& query) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t j = 0; j < query.size(); ++j) {
    if (j) out << ',';
    switch (query[j].tag) {
      case Tag::Cdf: out << "c:" << query[j].x; break;
      case Tag::Density: out << "d:" << query[j].x; break;
      case Tag::Marginalize: out << 'm'; break;
      case Tag::ConditionDensity: out << "given:" << query[j].x; break;
    }
  }
  return out.str();
}

QueryEngine::QueryEngine(const MdmaModel& model)
    : model_(&model), effective_bank_(model.effective_bank()), contraction_(model.ht()) {}

Eigen::MatrixXd QueryEngine::log_factors(int variable, std::span<const Tag> tags,
                                         std::span<const double> x, std::size_t rows) const {
  const int d = model_->d();
  const int m = model_->m();
  const NetShape& shape = model_->net_shape();
  // Filled row by row (one network at a time), hence row-major.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out =
      Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(rows));
  std::vector<std::size_t> active;
  std::vector<double> xs;
  bool any_cdf = false;
  bool any_density = false;
  for (std::size_t b = 0; b < rows; ++b) {
    const Tag tag = tags[b * d + variable];
    if (tag == Tag::Marginalize) continue;
    const double xv = x[b * d + variable];
    if (!std::isfinite(xv)) throw InvalidArgument("non-finite input");
    active.push_back(b);
    xs.push_back(xv);
    (tag == Tag::Cdf ? any_cdf : any_density) = true;
  }
  if (active.empty()) return out;
  std::vector<double> log_cdf(any_cdf ? xs.size() : 0);
  std::vector<double> log_density(any_density ? xs.size() : 0);
  for (int i = 0; i < m; ++i) {
    net_forward_batch(shape, effective_net(i, variable), xs, log_cdf, log_density);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t b = active[a];
      out(i, static_cast<Eigen::Index>(b)) = tags[b * d + variable] == Tag::Cdf ? log_cdf[a] : log_density[a];
    }
  }
  return out;
}

Eigen::VectorXd QueryEngine::log_contract(std::span<const Tag> tags, std::span<const double> x,
                                          std::size_t rows) const {
  const int d = model_->d();
  if (tags.size() != rows * d || x.size() != rows * d)
    throw InvalidArgument("query batch must be rows x d");
  Eigen::VectorXd result(static_cast<Eigen::Index>(rows));
  const auto order = model_->leaf_order();
  for (std::size_t begin = 0; begin < rows; begin += kChunkRows) {
    const std::size_t n = std::min(kChunkRows, rows - begin);
    const auto tag_chunk = tags.subspan(begin * d, n * d);
    const auto x_chunk = x.subspan(begin * d, n * d);
    std::vector<LeafBatch> leaves;
    leaves.reserve(d);
    for (int p = 0; p < d; ++p)
      leaves.push_back(leaf_from_log_factors(log_factors(order[p], tag_chunk, x_chunk, n)));
    result.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(n)) =
        contraction_.forward(leaves, nullptr);
  }
  return result;
}

Eigen::MatrixXd QueryEngine::log_marginals(const RowMatrix& x,
                                           const std::vector<std::vector<char>>& subsets) const {
  const int d = model_->d();
  const int m = model_->m();
  if (x.cols() != d) throw InvalidArgument("data must have d columns");
  std::vector<char> used(d, 0);
  for (const auto& subset : subsets) {
    if (subset.size() != static_cast<std::size_t>(d)) throw InvalidArgument("subset mask must have d entries");
    bool any = false;
    for (int v = 0; v < d; ++v) {
      used[v] |= subset[v];
      any |= subset[v] != 0;
    }
    if (!any) throw InvalidArgument("empty observation");
  }
  const auto rows = static_cast<std::size_t>(x.rows());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(subsets.size()));
  const auto order = model_->leaf_order();
  for (std::size_t begin = 0; begin < rows; begin += kChunkRows) {
    const std::size_t n = std::min(kChunkRows, rows - begin);
    std::vector<Tag> tags(n * d);
    for (std::size_t b = 0; b < n; ++b)
      for (int v = 0; v < d; ++v) tags[b * d + v] = used[v] ? Tag::Density : Tag::Marginalize;
    const std::span<const double> x_chunk(x.data() + begin * d, n * d);
    LeafBatch ones{Eigen::MatrixXd::Ones(m, static_cast<Eigen::Index>(n)),
                   Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
    std::vector<LeafBatch> observed(d);
    for (int p = 0; p < d; ++p)
      if (used[order[p]]) observed[p] = leaf_from_log_factors(log_factors(order[p], tags, x_chunk, n));
    std::vector<LeafBatch> leaves(d);
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      for (int p = 0; p < d; ++p) leaves[p] = subsets[s][order[p]] ? observed[p] : ones;
      out.col(static_cast<Eigen::Index>(s)).segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(n)) =
          contraction_.forward(leaves, nullptr);
    }
  }
  return out;
}

double QueryEngine::evaluate(const QuerySpec& query) const {
  const int d = model_->d();
  if (query.size() != static_cast<std::size_t>(d))
    throw InvalidArgument("query must have one tag per variable");
  std::vector<Tag> tags(d);
  std::vector<double> x(d);
  bool conditional = false;
  int query_vars = 0;
  for (int j = 0; j < d; ++j) {
    tags[j] = query[j].tag;
    x[j] = query[j].x;
    conditional |= tags[j] == Tag::ConditionDensity;
    query_vars += tags[j] == Tag::Cdf || tags[j] == Tag::Density;
  }
  const double log_num = log_contract(tags, x, 1)(0);
  if (!conditional) return std::exp(log_num);
  if (query_vars == 0)
    throw InvalidArgument("conditional query needs at least one non-conditioning variable");
  for (auto& t : tags)
    if (t == Tag::Cdf || t == Tag::Density) t = Tag::Marginalize;
  const double log_den = log_contract(tags, x, 1)(0);
  if (!(log_den >= std::log(1e-300))) throw NumericalError("conditioning on zero-density event");
  return std::exp(log_num - log_den);
}

double QueryEngine::log_density(std::span<const double> x,
                                std::span<const std::uint8_t> missing) const {
  const int d = model_->d();
  if (x.size() != static_cast<std::size_t>(d)) throw InvalidArgument("point must have d coordinates");
  if (!missing.empty() && missing.size() != x.size())
    throw InvalidArgument("mask must have d entries");
  RowMatrix row(1, d);
  for (int j = 0; j < d; ++j) row(0, j) = x[j];
  return log_density_batch(row, missing)(0);
}

Eigen::VectorXd QueryEngine::log_density_batch(const RowMatrix& x,
                                               std::span<const std::uint8_t> missing) const {
  const int d = model_->d();
  if (x.cols() != d) throw InvalidArgument("data must have d columns");
  const auto rows = static_cast<std::size_t>(x.rows());
  if (!missing.empty() && missing.size() != rows * d)
    throw InvalidArgument("mask must be rows x d");
  std::vector<Tag> tags(rows * d, Tag::Density);
  for (std::size_t b = 0; b < rows; ++b) {
    int observed = 0;
    for (int j = 0; j < d; ++j) {
      if (!missing.empty() && missing[b * d + j]) {
        tags[b * d + j] = Tag::Marginalize;
      } else {
        ++observed;
      }
    }
    if (observed == 0) throw InvalidArgument("empty observation");
  }
  return log_contract(tags, std::span<const double>(x.data(), rows * d), rows);
}

double evaluate(const MdmaModel& model, const QuerySpec& query) {
  return QueryEngine(model).evaluate(query);
}

double log_density(const MdmaModel& model, std::span<const double> x,
                   std::span<const std::uint8_t> missing) {
  return QueryEngine(model).log_density(x, missing);
}

RowMatrix density_grid(const MdmaModel& model, int var1, int var2, double lo, double hi, int steps) {
  const int d = model.d();
  if (var1 < 0 || var1 >= d || var2 < 0 || var2 >= d || var1 == var2)
    throw InvalidArgument("grid needs two distinct variables in range");
  if (!(hi > lo) || steps < 1) throw InvalidArgument("grid needs min < max and steps >= 1");
  const double h = (hi - lo) / steps;
  const std::size_t rows = static_cast<std::size_t>(steps) * steps;
  std::vector<Tag> tags(rows * d, Tag::Marginalize);
  std::vector<double> x(rows * d, 0.0);
  for (int a = 0; a < steps; ++a) {
    for (int b = 0; b < steps; ++b) {
      const std::size_t row = static_cast<std::size_t>(a) * steps + b;
      tags[row * d + var1] = Tag::Density;
      tags[row * d + var2] = Tag::Density;
      x[row * d + var1] = lo + (a + 0.5) * h;
      x[row * d + var2] = lo + (b + 0.5) * h;
    }
  }
  const Eigen::VectorXd log_f = QueryEngine(model).log_contract(tags, x, rows);
  RowMatrix out(static_cast<Eigen::Index>(rows), 3);
  for (std::size_t row = 0; row < rows; ++row) {
    const auto r = static_cast<Eigen::Index>(row);
    out(r, 0) = x[row * d + var1];
    out(r, 1) = x[row * d + var2];
    out(r, 2) = std::exp(log_f(r));
  }
  return out;
}

}  // namespace mdma

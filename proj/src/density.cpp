#include "cliff/density.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace cliff::density {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

// diff[g,k] = at_g - z_i^(k), the K x n evaluation-point/sample offsets all
// dense kernels are built from.
ad::Tensor point_sample_diff(const std::vector<double>& at, const ad::Tensor& column) {
    ad::Tensor pts = ad::Tensor::constant(at.size(), 1, at);
    return ad::sub(pts, ad::transpose(column));
}

// N(at_g; z^(k), sigma^2) as a K x n matrix.
ad::Tensor kernel_matrix(const ad::Tensor& diff, double sigma) {
    ad::Tensor sq = ad::mul(diff, diff);
    ad::Tensor e = ad::exp(ad::scale(sq, -0.5 / (sigma * sigma)));
    return ad::scale(e, kInvSqrt2Pi / sigma);
}

// d/d at_g N(at_g; z^(k), sigma^2) = -(diff / sigma^2) * N(...).
ad::Tensor kernel_derivative_matrix(const ad::Tensor& diff, double sigma) {
    return ad::scale(ad::mul(diff, kernel_matrix(diff, sigma)), -1.0 / (sigma * sigma));
}

const ad::Tensor& column_of(const StandardizedBatch& batch, std::size_t i, const char* who) {
    if (i >= batch.columns.size())
        throw ShapeError(std::string(who) + ": factor index " + std::to_string(i) +
                         " out of range for d=" + std::to_string(batch.columns.size()));
    return batch.columns[i];
}

thread_local KernelEvalCounts g_counts;

}  // namespace

KernelEvalCounts& kernel_eval_counts() { return g_counts; }
void reset_kernel_eval_counts() { g_counts = KernelEvalCounts{}; }

void KernelConfig::validate() const {
    if (!(sigma > 0.0)) throw DomainError("KernelConfig: sigma must be positive");
    if (!(grid_a < grid_b)) throw DomainError("KernelConfig: grid_a must be below grid_b");
    if (grid_k < 2) throw DomainError("KernelConfig: grid_k must be at least 2");
}

std::vector<double> make_grid(double a, double b, int k) {
    std::vector<double> pts(static_cast<std::size_t>(k));
    const double h = (b - a) / k;
    for (int g = 0; g < k; ++g) pts[static_cast<std::size_t>(g)] = a + h * g;
    return pts;
}

StandardizedBatch standardize(const ad::Tensor& batch) {
    const std::size_t n = batch.rows();
    const std::size_t d = batch.cols();
    if (n < 2) throw ShapeError("standardize: need at least 2 samples");

    StandardizedBatch out;
    out.means.resize(d);
    out.stds.resize(d);
    out.columns.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
        ad::Tensor col = ad::slice_col(batch, i);
        ad::Tensor m = ad::mean(col);
        ad::Tensor centered = ad::sub(col, m);
        ad::Tensor var = ad::mean(ad::mul(centered, centered));
        const double raw_std = std::sqrt(var.item());
        if (raw_std < 1e-8)
            throw DegenerateFactorError("standardize: factor column " + std::to_string(i) +
                                        " is degenerate (std " + std::to_string(raw_std) + ")");
        // var > 0 is guaranteed by the degeneracy check, so sqrt via exp/log
        // stays on safe ground.
        ad::Tensor stddev = ad::exp(ad::scale(ad::log(var), 0.5));
        out.columns.push_back(ad::div(centered, stddev));
        out.means[i] = m.item();
        out.stds[i] = raw_std;
    }
    out.values = ad::concat_cols(out.columns);
    return out;
}

DensityGrid marginal_pdf(const StandardizedBatch& batch, std::size_t i,
                         const std::vector<double>& at, const KernelConfig& cfg) {
    cfg.validate();
    const ad::Tensor& col = column_of(batch, i, "marginal_pdf");
    const std::size_t n = col.rows();
    g_counts.marginal_1d += static_cast<std::uint64_t>(at.size()) * n;

    ad::Tensor kern = kernel_matrix(point_sample_diff(at, col), cfg.sigma);
    DensityGrid grid;
    grid.points = at;
    grid.spacing = at.size() > 1 ? (at[1] - at[0]) : 0.0;
    grid.values = ad::scale(ad::rowsum(kern), 1.0 / static_cast<double>(n));
    grid.kind = GridKind::marginal;
    return grid;
}

DensityGrid marginal_pdf_derivative(const StandardizedBatch& batch, std::size_t i,
                                    const std::vector<double>& at, const KernelConfig& cfg) {
    cfg.validate();
    const ad::Tensor& col = column_of(batch, i, "marginal_pdf_derivative");
    const std::size_t n = col.rows();
    g_counts.marginal_derivative_1d += static_cast<std::uint64_t>(at.size()) * n;

    ad::Tensor dk = kernel_derivative_matrix(point_sample_diff(at, col), cfg.sigma);
    DensityGrid grid;
    grid.points = at;
    grid.spacing = at.size() > 1 ? (at[1] - at[0]) : 0.0;
    grid.values = ad::scale(ad::rowsum(dk), 1.0 / static_cast<double>(n));
    grid.kind = GridKind::marginal_derivative;
    return grid;
}

DensityGrid joint_pdf_partial(const StandardizedBatch& batch, std::size_t i, std::size_t j,
                              const std::vector<double>& at_i, const std::vector<double>& zeta,
                              const KernelConfig& cfg) {
    cfg.validate();
    if (i == j) throw DomainError("joint_pdf_partial: factor pair requires i != j");
    if (zeta.empty()) throw DomainError("joint_pdf_partial: need at least one conditioning value");
    const ad::Tensor& col_i = column_of(batch, i, "joint_pdf_partial");
    const ad::Tensor& col_j = column_of(batch, j, "joint_pdf_partial");
    const std::size_t n = col_i.rows();
    g_counts.joint_partial_2d +=
        static_cast<std::uint64_t>(at_i.size()) * zeta.size() * n;

    // The product kernel factorizes, so the K x M table of partial
    // derivatives is one matrix product of the per-factor K x n and M x n
    // kernel matrices.
    ad::Tensor di = kernel_derivative_matrix(point_sample_diff(at_i, col_i), cfg.sigma);
    ad::Tensor kj = kernel_matrix(point_sample_diff(zeta, col_j), cfg.sigma);
    DensityGrid grid;
    grid.points = at_i;
    grid.spacing = at_i.size() > 1 ? (at_i[1] - at_i[0]) : 0.0;
    grid.values = ad::scale(ad::matmul_nt(di, kj), 1.0 / static_cast<double>(n));
    grid.kind = GridKind::joint_partial;
    return grid;
}

DensityGrid conditional_derivative(const StandardizedBatch& batch, std::size_t i, std::size_t j,
                                   const std::vector<double>& at_i,
                                   const std::vector<double>& zeta, const KernelConfig& cfg) {
    DensityGrid joint = joint_pdf_partial(batch, i, j, at_i, zeta, cfg);
    DensityGrid pj = marginal_pdf(batch, j, zeta, cfg);
    for (std::size_t m = 0; m < zeta.size(); ++m) {
        if (pj.values.value()[m] < ad::kEps)
            throw ConditioningError("conditional_derivative: p(zeta_" + std::to_string(m) +
                                    ") vanishes for factor " + std::to_string(j) +
                                    "; conditioning values must come from the batch");
    }
    DensityGrid grid;
    grid.points = at_i;
    grid.spacing = joint.spacing;
    grid.values = ad::div(joint.values, ad::scale(ad::transpose(pj.values), 1.0, ad::kEps));
    grid.kind = GridKind::conditional_derivative;
    return grid;
}

ad::Tensor integrate(const DensityGrid& grid) {
    return ad::scale(ad::sum(grid.values), grid.spacing);
}

std::string to_csv(const DensityGrid& grid) {
    std::ostringstream os;
    const auto& v = grid.values.value();
    const std::size_t k = grid.values.rows();
    const std::size_t m = grid.values.cols();
    char buf[96];
    if (m == 1) {
        os << "grid_point,value\n";
        for (std::size_t g = 0; g < k; ++g) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid.points[g], v[g]);
            os << buf;
        }
    } else {
        os << "grid_point,value,conditioning_index\n";
        for (std::size_t c = 0; c < m; ++c)
            for (std::size_t g = 0; g < k; ++g) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", grid.points[g], v[g * m + c],
                              c);
                os << buf;
            }
    }
    return os.str();
}

}  // namespace cliff::density

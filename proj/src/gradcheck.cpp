#include "cliff/gradcheck.hpp"

#include <cmath>
#include <string>

namespace cliff::ad {

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& build, std::size_t rows,
                           std::size_t cols, const std::vector<double>& point, double fd_step,
                           double zero_floor) {
    if (fd_step <= 0.0) throw DomainError("grad_check: fd_step must be positive");
    if (point.size() != rows * cols) throw ShapeError("grad_check: point does not match shape");

    Tensor x = Tensor::param(rows, cols, point);
    Tensor root = build(x);
    if (!root.is_scalar()) throw ShapeError("grad_check: build must produce a scalar");
    if (!std::isfinite(root.item()))
        throw DomainError("grad_check: non-finite value at unperturbed point");
    backward(root);
    std::vector<double> analytic = x.grad();

    auto eval_at = [&](const std::vector<double>& p, std::size_t coord) {
        Tensor xp = Tensor::constant(rows, cols, p);
        double v = build(xp).item();
        if (!std::isfinite(v))
            throw DomainError("grad_check: non-finite value while perturbing coordinate " +
                              std::to_string(coord));
        return v;
    };

    GradCheckResult res;
    std::vector<double> p = point;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + fd_step;
        const double fp = eval_at(p, i);
        p[i] = keep - fd_step;
        const double fm = eval_at(p, i);
        p[i] = keep;
        const double fd = (fp - fm) / (2.0 * fd_step);
        if (std::max(std::fabs(analytic[i]), std::fabs(fd)) <= zero_floor) continue;
        const double err =
            std::fabs(analytic[i] - fd) / (std::fabs(analytic[i]) + std::fabs(fd) + 1e-12);
        if (err > res.max_rel_error) {
            res.max_rel_error = err;
            res.worst_index = i;
            res.analytic_at_worst = analytic[i];
            res.numeric_at_worst = fd;
        }
    }
    return res;
}

}  // namespace cliff::ad

#include "parest/basis.hpp"

#include <map>
#include <mutex>

namespace parest {

// ---------------------------------------------------------------------------
// Legendre
// ---------------------------------------------------------------------------

void legendre_values(int q, double x, double* out) {
  out[0] = 1.0;
  if (q >= 1) out[1] = x;
  for (int k = 2; k <= q; ++k)
    out[k] = ((2 * k - 1) * x * out[k - 1] - (k - 1) * out[k - 2]) / k;
}

namespace {
// P_0..P_q and their derivatives via P'_k = P'_{k-2} + (2k-1) P_{k-1}.
void legendre_all(int q, double x, double* val, double* der) {
  legendre_values(q, x, val);
  der[0] = 0.0;
  if (q >= 1) der[1] = 1.0;
  for (int k = 2; k <= q; ++k)
    der[k] = der[k - 2] + (2 * k - 1) * val[k - 1];
}
}  // namespace

double legendre_value(int q, double x) {
  require(q >= 0, "legendre_value: negative degree");
  std::vector<double> v(q + 1);
  legendre_values(q, x, v.data());
  return v[q];
}

double legendre_derivative(int q, double x) {
  require(q >= 0, "legendre_derivative: negative degree");
  std::vector<double> v(q + 1), d(q + 1);
  legendre_all(q, x, v.data(), d.data());
  return d[q];
}

LegendreTimeBasis::LegendreTimeBasis(double t0, double t1, int degree)
    : t0_(t0), t1_(t1), degree_(degree) {
  require(t1 > t0, "LegendreTimeBasis: empty interval");
  require(degree >= 0, "LegendreTimeBasis: negative degree");
}

double LegendreTimeBasis::legendre(int q, double t) const {
  require(q >= 0, "legendre: negative degree");
  return legendre_value(q, reference_coord(t));
}

double LegendreTimeBasis::legendre_dt(int q, double t) const {
  require(q >= 0, "legendre_dt: negative degree");
  return legendre_derivative(q, reference_coord(t)) * 2.0 / tau();
}

double LegendreTimeBasis::l2_norm_sq(int q) const {
  require(q >= 0, "l2_norm_sq: negative degree");
  return tau() / double(2 * q + 1);
}

std::vector<double> LegendreTimeBasis::derivative_coeffs(
    const std::vector<double>& a) const {
  // d/dx P_m = sum_{k<m, m-k odd} (2k+1) P_k, then the 2/tau chain factor.
  const int m = static_cast<int>(a.size()) - 1;
  std::vector<double> b(std::max(m, 0), 0.0);
  for (int k = 0; k < m; ++k) {
    double s = 0.0;
    for (int mm = k + 1; mm <= m; ++mm)
      if ((mm - k) % 2 == 1) s += a[mm];
    b[k] = (2.0 / tau()) * (2 * k + 1) * s;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Scalar basis
// ---------------------------------------------------------------------------

void scalar_basis_eval(const ScalarBasisSig& sig, double l0, double l1,
                       double l2, double* val, double* d0, double* d1,
                       double* d2) {
  const double l[3] = {l0, l1, l2};
  int idx = 0;
  // vertices
  for (int i = 0; i < 3; ++i) {
    val[idx] = l[i];
    d0[idx] = (i == 0);
    d1[idx] = (i == 1);
    d2[idx] = (i == 2);
    ++idx;
  }
  // edge modes
  double pv[16], pd[16];
  for (int e = 0; e < 3; ++e) {
    const int a = kEdgeVertex[e][0], b = kEdgeVertex[e][1];
    const int nmode = sig.edge_p[e] - 1;
    if (nmode <= 0) continue;
    const double s = sig.edge_sign[e];
    const double z = s * (l[b] - l[a]);
    legendre_all(nmode - 1, z, pv, pd);
    for (int k = 0; k < nmode; ++k) {
      const double base = l[a] * l[b];
      val[idx] = base * pv[k];
      double da = l[b] * pv[k] - base * pd[k] * s;
      double db = l[a] * pv[k] + base * pd[k] * s;
      double g[3] = {0.0, 0.0, 0.0};
      g[a] = da;
      g[b] = db;
      d0[idx] = g[0];
      d1[idx] = g[1];
      d2[idx] = g[2];
      ++idx;
    }
  }
  // bubbles
  if (sig.p >= 3) {
    const int nb = sig.p - 3;
    double p1v[16], p1d[16], p2v[16], p2d[16];
    legendre_all(nb, l1 - l0, p1v, p1d);
    legendre_all(nb, 2.0 * l2 - 1.0, p2v, p2d);
    const double B = l0 * l1 * l2;
    for (int i = 0; i <= nb; ++i) {
      for (int j = 0; i + j <= nb; ++j) {
        val[idx] = B * p1v[i] * p2v[j];
        d0[idx] = l1 * l2 * p1v[i] * p2v[j] - B * p1d[i] * p2v[j];
        d1[idx] = l0 * l2 * p1v[i] * p2v[j] + B * p1d[i] * p2v[j];
        d2[idx] = l0 * l1 * p1v[i] * p2v[j] + B * p1v[i] * p2d[j] * 2.0;
        ++idx;
      }
    }
  }
}

const ScalarBasisTable& scalar_basis_table(const ScalarBasisSig& sig,
                                           const TriangleRule& rule) {
  using Key = std::pair<ScalarBasisSig, const TriangleRule*>;
  static std::map<Key, ScalarBasisTable> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  Key key{sig, &rule};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  ScalarBasisTable tab;
  tab.nfun = sig.count();
  tab.npts = rule.size();
  tab.val.resize(tab.nfun, tab.npts);
  tab.d0.resize(tab.nfun, tab.npts);
  tab.d1.resize(tab.nfun, tab.npts);
  tab.d2.resize(tab.nfun, tab.npts);
  std::vector<double> v(tab.nfun), a(tab.nfun), b(tab.nfun), c(tab.nfun);
  for (int q = 0; q < tab.npts; ++q) {
    const auto& pt = rule.points[q];
    scalar_basis_eval(sig, pt.l0, pt.l1, pt.l2, v.data(), a.data(), b.data(),
                      c.data());
    for (int i = 0; i < tab.nfun; ++i) {
      tab.val(i, q) = v[i];
      tab.d0(i, q) = a[i];
      tab.d1(i, q) = b[i];
      tab.d2(i, q) = c[i];
    }
  }
  return cache.emplace(std::move(key), std::move(tab)).first->second;
}

// ---------------------------------------------------------------------------
// RTN element
// ---------------------------------------------------------------------------

namespace {
std::vector<std::pair<int, int>> monomials_up_to(int p) {
  std::vector<std::pair<int, int>> m;
  for (int d = 0; d <= p; ++d)
    for (int a = d; a >= 0; --a) m.emplace_back(a, d - a);
  return m;
}

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}
}  // namespace

RTNElement::RTNElement(Vec2 v0, Vec2 v1, Vec2 v2, int order,
                       std::array<bool, 3> edge_forward)
    : p_(order) {
  require(order >= 0, "RTNElement: negative order");
  v_[0] = v0;
  v_[1] = v1;
  v_[2] = v2;
  centroid_ = (1.0 / 3.0) * (v0 + v1 + v2);
  scale_ = std::max({norm(v1 - v0), norm(v2 - v1), norm(v0 - v2)});

  const int nd = ndofs();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nd, ngen());

  // Edge normal moments.
  const GaussRule line = gauss_legendre(p_ + 2);
  for (int e = 0; e < 3; ++e) {
    Vec2 a = v_[kEdgeVertex[e][0]], b = v_[kEdgeVertex[e][1]];
    if (!edge_forward[e]) std::swap(a, b);
    const Vec2 t = (1.0 / norm(b - a)) * (b - a);
    const Vec2 n{t.y, -t.x};
    std::vector<double> leg(p_ + 1);
    for (int iq = 0; iq < line.size(); ++iq) {
      const double s = 0.5 * (1.0 + line.points[iq]);
      const double w = 0.5 * line.weights[iq];
      const Vec2 x = a + s * (b - a);
      legendre_values(p_, 2.0 * s - 1.0, leg.data());
      for (int g = 0; g < ngen(); ++g) {
        const double vn = dot(gen_value(g, x), n);
        for (int k = 0; k <= p_; ++k)
          D(edge_offset(e) + k, g) +=
              w * vn * std::sqrt(double(2 * k + 1)) * leg[k];
      }
    }
  }

  // Interior moments against P_{p-1}(K)^2.
  if (p_ >= 1) {
    const TriangleRule& rule = triangle_rule(2 * p_ + 1);
    const auto monos = monomials_up_to(p_ - 1);
    for (const auto& pt : rule.points) {
      const Vec2 x = pt.l0 * v_[0] + pt.l1 * v_[1] + pt.l2 * v_[2];
      // (1/|K|) int_K: physical weight pt.w*2|K| divided by |K|.
      const double w = pt.w * 2.0;
      const Vec2 u = (1.0 / scale_) * (x - centroid_);
      for (int g = 0; g < ngen(); ++g) {
        const Vec2 gv = gen_value(g, x);
        for (size_t m = 0; m < monos.size(); ++m) {
          const double mono =
              ipow(u.x, monos[m].first) * ipow(u.y, monos[m].second);
          D(interior_offset() + 2 * int(m) + 0, g) += w * mono * gv.x;
          D(interior_offset() + 2 * int(m) + 1, g) += w * mono * gv.y;
        }
      }
    }
  }

  coeff_ = D.colPivHouseholderQr().solve(
      Eigen::MatrixXd::Identity(nd, nd));
}

Vec2 RTNElement::gen_value(int g, Vec2 x) const {
  const Vec2 u = (1.0 / scale_) * (x - centroid_);
  const int nscal = (p_ + 1) * (p_ + 2) / 2;
  if (g < 2 * nscal) {
    const auto monos = monomials_up_to(p_);
    const auto& m = monos[g / 2];
    const double mono = ipow(u.x, m.first) * ipow(u.y, m.second);
    return (g % 2 == 0) ? Vec2{mono, 0.0} : Vec2{0.0, mono};
  }
  const int a = g - 2 * nscal;  // exponent of u.x in the degree-p monomial
  const double mono = ipow(u.x, p_ - a) * ipow(u.y, a);
  return Vec2{u.x * mono, u.y * mono};
}

double RTNElement::gen_divergence(int g, Vec2 x) const {
  const Vec2 u = (1.0 / scale_) * (x - centroid_);
  const int nscal = (p_ + 1) * (p_ + 2) / 2;
  if (g < 2 * nscal) {
    const auto monos = monomials_up_to(p_);
    const auto& m = monos[g / 2];
    if (g % 2 == 0) {
      if (m.first == 0) return 0.0;
      return m.first * ipow(u.x, m.first - 1) *
             ipow(u.y, m.second) / scale_;
    }
    if (m.second == 0) return 0.0;
    return m.second * ipow(u.x, m.first) * ipow(u.y, m.second - 1) /
           scale_;
  }
  const int a = g - 2 * nscal;
  const double mono = ipow(u.x, p_ - a) * ipow(u.y, a);
  return double(p_ + 2) * mono / scale_;
}

Vec2 RTNElement::shape_value(int i, Vec2 x) const {
  Vec2 out{0.0, 0.0};
  for (int g = 0; g < ngen(); ++g) {
    const double c = coeff_(g, i);
    if (c == 0.0) continue;
    out = out + c * gen_value(g, x);
  }
  return out;
}

double RTNElement::shape_divergence(int i, Vec2 x) const {
  double out = 0.0;
  for (int g = 0; g < ngen(); ++g) {
    const double c = coeff_(g, i);
    if (c == 0.0) continue;
    out += c * gen_divergence(g, x);
  }
  return out;
}

void RTNElement::tabulate(const std::vector<Vec2>& pts, Eigen::MatrixXd& vx,
                          Eigen::MatrixXd& vy, Eigen::MatrixXd& div) const {
  const int np = static_cast<int>(pts.size());
  Eigen::MatrixXd gx(ngen(), np), gy(ngen(), np), gd(ngen(), np);
  for (int q = 0; q < np; ++q)
    for (int g = 0; g < ngen(); ++g) {
      const Vec2 v = gen_value(g, pts[q]);
      gx(g, q) = v.x;
      gy(g, q) = v.y;
      gd(g, q) = gen_divergence(g, pts[q]);
    }
  vx = coeff_.transpose() * gx;
  vy = coeff_.transpose() * gy;
  div = coeff_.transpose() * gd;
}

Eigen::VectorXd RTNElement::gen_coeffs(const double* coeffs) const {
  Eigen::VectorXd gc = Eigen::VectorXd::Zero(ngen());
  for (int i = 0; i < ndofs(); ++i)
    if (coeffs[i] != 0.0) gc += coeffs[i] * coeff_.col(i);
  return gc;
}

Vec2 RTNElement::value_from_gen(const Eigen::VectorXd& gc, Vec2 x) const {
  Vec2 out{0.0, 0.0};
  for (int g = 0; g < ngen(); ++g)
    if (gc[g] != 0.0) out = out + gc[g] * gen_value(g, x);
  return out;
}

double RTNElement::divergence_from_gen(const Eigen::VectorXd& gc,
                                       Vec2 x) const {
  double out = 0.0;
  for (int g = 0; g < ngen(); ++g)
    if (gc[g] != 0.0) out += gc[g] * gen_divergence(g, x);
  return out;
}

Vec2 RTNElement::value(const double* coeffs, Vec2 x) const {
  return value_from_gen(gen_coeffs(coeffs), x);
}

double RTNElement::divergence(const double* coeffs, Vec2 x) const {
  return divergence_from_gen(gen_coeffs(coeffs), x);
}

}  // namespace parest

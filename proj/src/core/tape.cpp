#include "core/tape.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <memory>

#include "core/rotations.hpp"

namespace meev::ad {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

int shape_numel(const Shape& s) {
  int n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

const Shape& Var::shape() const { return tape_->node(index_).shape; }
int Var::numel() const { return shape_numel(shape()); }
const std::vector<double>& Var::value() const {
  return tape_->node(index_).value;
}
const std::vector<double>& Var::grad() const {
  return tape_->grad_buf(index_);
}

Var Tape::emit(Shape shape, std::vector<double> value, bool requires_grad,
               std::function<void()> backprop) {
  check_arg(shape_numel(shape) == static_cast<int>(value.size()),
            "tape: shape ", shape_str(shape), " does not match value size ",
            value.size());
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = requires_grad ? std::move(backprop) : nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

std::vector<double>& Tape::grad_buf(int i) {
  Node& n = node(i);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Var Tape::constant(Shape shape, std::vector<double> value) {
  return emit(std::move(shape), std::move(value), false, nullptr);
}

Var Tape::zeros(Shape shape) {
  int n = shape_numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Var Tape::leaf(Shape shape, std::vector<double> value) {
  return emit(std::move(shape), std::move(value), true, nullptr);
}

void Tape::backward(Var loss) {
  check_arg(loss.valid() && loss.tape() == this,
            "backward: loss not on this tape");
  check_arg(loss.numel() == 1, "backward: loss must be scalar");
  grad_buf(loss.index())[0] = 1.0;
  for (int i = loss.index(); i >= 0; --i) {
    Node& n = node(i);
    if (!n.requires_grad || n.grad.empty() || !n.backprop) continue;
    n.backprop();
  }
}

// ---------------------------------------------------------------------------
// elementwise / reductions

Var Tape::add(Var a, Var b) {
  check_arg(a.shape() == b.shape(), "add: shape mismatch ",
            shape_str(a.shape()), " vs ", shape_str(b.shape()));
  const auto& va = val(a);
  const auto& vb = val(b);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  int ia = a.index(), ib = b.index(), io = size();
  bool needs = rg(a) || rg(b);
  return emit(a.shape(), std::move(out), needs, [this, ia, ib, io] {
    const auto& g = node(io).grad;
    if (node(ia).requires_grad) {
      auto& ga = grad_buf(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (node(ib).requires_grad) {
      auto& gb = grad_buf(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  check_arg(a.shape() == b.shape(), "sub: shape mismatch ",
            shape_str(a.shape()), " vs ", shape_str(b.shape()));
  const auto& va = val(a);
  const auto& vb = val(b);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  int ia = a.index(), ib = b.index(), io = size();
  bool needs = rg(a) || rg(b);
  return emit(a.shape(), std::move(out), needs, [this, ia, ib, io] {
    const auto& g = node(io).grad;
    if (node(ia).requires_grad) {
      auto& ga = grad_buf(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (node(ib).requires_grad) {
      auto& gb = grad_buf(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  check_arg(a.shape() == b.shape(), "mul: shape mismatch ",
            shape_str(a.shape()), " vs ", shape_str(b.shape()));
  const auto& va = val(a);
  const auto& vb = val(b);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  int ia = a.index(), ib = b.index(), io = size();
  bool needs = rg(a) || rg(b);
  return emit(a.shape(), std::move(out), needs, [this, ia, ib, io] {
    const auto& g = node(io).grad;
    const auto& va2 = node(ia).value;
    const auto& vb2 = node(ib).value;
    if (node(ia).requires_grad) {
      auto& ga = grad_buf(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
    }
    if (node(ib).requires_grad) {
      auto& gb = grad_buf(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[i];
    }
  });
}

Var Tape::scale(Var a, double s) {
  const auto& va = val(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * s;
  int ia = a.index(), io = size();
  return emit(a.shape(), std::move(out), rg(a), [this, ia, io, s] {
    const auto& g = node(io).grad;
    auto& ga = grad_buf(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

Var Tape::add_scalar(Var a, double s) {
  const auto& va = val(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + s;
  int ia = a.index(), io = size();
  return emit(a.shape(), std::move(out), rg(a), [this, ia, io] {
    const auto& g = node(io).grad;
    auto& ga = grad_buf(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::relu(Var a) {
  const auto& va = val(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] > 0 ? va[i] : 0;
  int ia = a.index(), io = size();
  return emit(a.shape(), std::move(out), rg(a), [this, ia, io] {
    const auto& g = node(io).grad;
    const auto& x = node(ia).value;
    auto& ga = grad_buf(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0) ga[i] += g[i];
  });
}

Var Tape::abs(Var a) {
  const auto& va = val(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(va[i]);
  int ia = a.index(), io = size();
  return emit(a.shape(), std::move(out), rg(a), [this, ia, io] {
    const auto& g = node(io).grad;
    const auto& x = node(ia).value;
    auto& ga = grad_buf(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0)
        ga[i] += g[i];
      else if (x[i] < 0)
        ga[i] -= g[i];
    }
  });
}

Var Tape::sum(Var a) {
  const auto& va = val(a);
  double acc = 0;
  for (double v : va) acc += v;
  int ia = a.index(), io = size();
  return emit({1}, {acc}, rg(a), [this, ia, io] {
    double g = node(io).grad[0];
    auto& ga = grad_buf(ia);
    for (double& v : ga) v += g;
  });
}

Var Tape::mean(Var a) { return scale(sum(a), 1.0 / a.numel()); }

Var Tape::rowsum(Var a) {
  check_arg(a.shape().size() == 2, "rowsum expects 2-d input");
  int r = a.shape()[0], c = a.shape()[1];
  const auto& va = val(a);
  std::vector<double> out(r, 0.0);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[i] += va[i * c + j];
  int ia = a.index(), io = size();
  return emit({r}, std::move(out), rg(a), [this, ia, io, r, c] {
    const auto& g = node(io).grad;
    auto& ga = grad_buf(ia);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ga[i * c + j] += g[i];
  });
}

Var Tape::softmax_rows(Var a) {
  check_arg(a.shape().size() == 2, "softmax_rows expects 2-d input");
  int r = a.shape()[0], c = a.shape()[1];
  const auto& va = val(a);
  std::vector<double> out(va.size());
  for (int i = 0; i < r; ++i) {
    double m = va[i * c];
    for (int j = 1; j < c; ++j) m = std::max(m, va[i * c + j]);
    double s = 0;
    for (int j = 0; j < c; ++j) {
      double e = std::exp(va[i * c + j] - m);
      out[i * c + j] = e;
      s += e;
    }
    double inv = 1.0 / s;
    for (int j = 0; j < c; ++j) out[i * c + j] *= inv;
  }
  int ia = a.index(), io = size();
  return emit(a.shape(), std::move(out), rg(a), [this, ia, io, r, c] {
    const auto& g = node(io).grad;
    const auto& y = node(io).value;
    auto& ga = grad_buf(ia);
    for (int i = 0; i < r; ++i) {
      double dot = 0;
      for (int j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (int j = 0; j < c; ++j)
        ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// structure

Var Tape::reshape(Var a, Shape shape) {
  check_arg(shape_numel(shape) == a.numel(), "reshape: numel mismatch ",
            shape_str(a.shape()), " -> ", shape_str(shape));
  int ia = a.index(), io = size();
  return emit(std::move(shape), val(a), rg(a), [this, ia, io] {
    const auto& g = node(io).grad;
    auto& ga = grad_buf(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::slice_axis0(Var a, int start, int count) {
  check_arg(!a.shape().empty(), "slice_axis0: scalar input");
  int d0 = a.shape()[0];
  check_arg(start >= 0 && count >= 1 && start + count <= d0,
            "slice_axis0: range [", start, ",", start + count,
            ") out of bounds for dim ", d0);
  int stride = a.numel() / d0;
  Shape out_shape = a.shape();
  out_shape[0] = count;
  const auto& va = val(a);
  std::vector<double> out(va.begin() + static_cast<std::ptrdiff_t>(start) * stride,
                          va.begin() + static_cast<std::ptrdiff_t>(start + count) * stride);
  int ia = a.index(), io = size();
  return emit(std::move(out_shape), std::move(out), rg(a),
              [this, ia, io, start, stride] {
                const auto& g = node(io).grad;
                auto& ga = grad_buf(ia);
                for (std::size_t i = 0; i < g.size(); ++i)
                  ga[static_cast<std::size_t>(start) * stride + i] += g[i];
              });
}

Var Tape::slice_cols(Var a, int start, int count) {
  check_arg(a.shape().size() == 2, "slice_cols expects 2-d input");
  int r = a.shape()[0], c = a.shape()[1];
  check_arg(start >= 0 && count >= 1 && start + count <= c,
            "slice_cols: bad range");
  const auto& va = val(a);
  std::vector<double> out(static_cast<std::size_t>(r) * count);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < count; ++j) out[i * count + j] = va[i * c + start + j];
  int ia = a.index(), io = size();
  return emit({r, count}, std::move(out), rg(a),
              [this, ia, io, r, c, start, count] {
                const auto& g = node(io).grad;
                auto& ga = grad_buf(ia);
                for (int i = 0; i < r; ++i)
                  for (int j = 0; j < count; ++j)
                    ga[i * c + start + j] += g[i * count + j];
              });
}

Var Tape::concat_axis0(const std::vector<Var>& xs) {
  check_arg(!xs.empty(), "concat_axis0: empty input");
  Shape tail = xs[0].shape();
  check_arg(!tail.empty(), "concat_axis0: scalar inputs");
  int stride = xs[0].numel() / xs[0].shape()[0];
  int total = 0;
  bool needs = false;
  for (const Var& x : xs) {
    Shape s = x.shape();
    check_arg(s.size() == tail.size(), "concat_axis0: rank mismatch");
    for (std::size_t d = 1; d < s.size(); ++d)
      check_arg(s[d] == tail[d], "concat_axis0: trailing dim mismatch");
    total += s[0];
    needs = needs || rg(x);
  }
  Shape out_shape = tail;
  out_shape[0] = total;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * stride);
  std::vector<int> idx;
  std::vector<int> offsets;
  int off = 0;
  for (const Var& x : xs) {
    const auto& vx = val(x);
    out.insert(out.end(), vx.begin(), vx.end());
    idx.push_back(x.index());
    offsets.push_back(off);
    off += static_cast<int>(vx.size());
  }
  int io = size();
  return emit(std::move(out_shape), std::move(out), needs,
              [this, idx, offsets, io] {
                const auto& g = node(io).grad;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                  if (!node(idx[k]).requires_grad) continue;
                  auto& ga = grad_buf(idx[k]);
                  for (std::size_t i = 0; i < ga.size(); ++i)
                    ga[i] += g[offsets[k] + i];
                }
              });
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  check_arg(!xs.empty(), "concat_cols: empty input");
  int r = xs[0].shape()[0];
  int total = 0;
  bool needs = false;
  for (const Var& x : xs) {
    check_arg(x.shape().size() == 2 && x.shape()[0] == r,
              "concat_cols: inputs must be 2-d with equal rows");
    total += x.shape()[1];
    needs = needs || rg(x);
  }
  std::vector<double> out(static_cast<std::size_t>(r) * total);
  std::vector<int> idx, widths, offsets;
  int off = 0;
  for (const Var& x : xs) {
    int c = x.shape()[1];
    const auto& vx = val(x);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out[i * total + off + j] = vx[i * c + j];
    idx.push_back(x.index());
    widths.push_back(c);
    offsets.push_back(off);
    off += c;
  }
  int io = size();
  return emit({r, total}, std::move(out), needs,
              [this, idx, widths, offsets, io, r, total] {
                const auto& g = node(io).grad;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                  if (!node(idx[k]).requires_grad) continue;
                  auto& ga = grad_buf(idx[k]);
                  int c = widths[k];
                  for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                      ga[i * c + j] += g[i * total + offsets[k] + j];
                }
              });
}

Var Tape::detach(Var a) { return constant(a.shape(), val(a)); }

// ---------------------------------------------------------------------------
// linear algebra / layers

Var Tape::matmul(Var a, Var b) {
  check_arg(a.shape().size() == 2 && b.shape().size() == 2,
            "matmul expects 2-d inputs");
  int m = a.shape()[0], k = a.shape()[1];
  int k2 = b.shape()[0], n = b.shape()[1];
  check_arg(k == k2, "matmul: inner dim mismatch ", k, " vs ", k2);
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  {
    CMapRM ma(val(a).data(), m, k);
    CMapRM mb(val(b).data(), k, n);
    MapRM mo(out.data(), m, n);
    mo.noalias() = ma * mb;
  }
  int ia = a.index(), ib = b.index(), io = size();
  bool needs = rg(a) || rg(b);
  return emit({m, n}, std::move(out), needs, [this, ia, ib, io, m, k, n] {
    CMapRM g(node(io).grad.data(), m, n);
    if (node(ia).requires_grad) {
      CMapRM mb(node(ib).value.data(), k, n);
      MapRM ga(grad_buf(ia).data(), m, k);
      ga.noalias() += g * mb.transpose();
    }
    if (node(ib).requires_grad) {
      CMapRM ma(node(ia).value.data(), m, k);
      MapRM gb(grad_buf(ib).data(), k, n);
      gb.noalias() += ma.transpose() * g;
    }
  });
}

Var Tape::linear(Var x, Var w, Var b) {
  check_arg(x.shape().size() == 1, "linear: x must be 1-d");
  check_arg(w.shape().size() == 2, "linear: w must be 2-d");
  int n = x.shape()[0];
  int out_dim = w.shape()[0];
  check_arg(w.shape()[1] == n, "linear: w width ", w.shape()[1],
            " does not match input ", n);
  check_arg(b.shape() == Shape{out_dim}, "linear: bias shape mismatch");
  std::vector<double> out(out_dim);
  {
    CMapRM mw(val(w).data(), out_dim, n);
    Eigen::Map<const Eigen::VectorXd> vx(val(x).data(), n);
    Eigen::Map<const Eigen::VectorXd> vb(val(b).data(), out_dim);
    Eigen::Map<Eigen::VectorXd> vo(out.data(), out_dim);
    vo.noalias() = mw * vx + vb;
  }
  int ix = x.index(), iw = w.index(), ib = b.index(), io = size();
  bool needs = rg(x) || rg(w) || rg(b);
  return emit({out_dim}, std::move(out), needs,
              [this, ix, iw, ib, io, n, out_dim] {
                Eigen::Map<const Eigen::VectorXd> g(node(io).grad.data(),
                                                    out_dim);
                if (node(ix).requires_grad) {
                  CMapRM mw(node(iw).value.data(), out_dim, n);
                  Eigen::Map<Eigen::VectorXd> gx(grad_buf(ix).data(), n);
                  gx.noalias() += mw.transpose() * g;
                }
                if (node(iw).requires_grad) {
                  Eigen::Map<const Eigen::VectorXd> vx(node(ix).value.data(),
                                                       n);
                  MapRM gw(grad_buf(iw).data(), out_dim, n);
                  gw.noalias() += g * vx.transpose();
                }
                if (node(ib).requires_grad) {
                  Eigen::Map<Eigen::VectorXd> gb(grad_buf(ib).data(), out_dim);
                  gb.noalias() += g;
                }
              });
}

namespace {

// col is [cin*kh*kw, oh*ow], row-major
void im2col(const std::vector<double>& x, int cin, int h, int w, int kh,
            int kw, int stride, int pad, int oh, int ow,
            std::vector<double>& col) {
  col.assign(static_cast<std::size_t>(cin) * kh * kw * oh * ow, 0.0);
  int ow_total = oh * ow;
  for (int c = 0; c < cin; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        double* dst = col.data() +
                      (static_cast<std::size_t>(c) * kh * kw + i * kw + j) *
                          ow_total;
        for (int oy = 0; oy < oh; ++oy) {
          int sy = oy * stride + i - pad;
          if (sy < 0 || sy >= h) continue;
          const double* src =
              x.data() + (static_cast<std::size_t>(c) * h + sy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            int sx = ox * stride + j - pad;
            if (sx < 0 || sx >= w) continue;
            dst[oy * ow + ox] = src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& col, int cin, int h, int w, int kh,
                int kw, int stride, int pad, int oh, int ow,
                std::vector<double>& dx) {
  int ow_total = oh * ow;
  for (int c = 0; c < cin; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const double* src = col.data() +
                            (static_cast<std::size_t>(c) * kh * kw + i * kw +
                             j) *
                                ow_total;
        for (int oy = 0; oy < oh; ++oy) {
          int sy = oy * stride + i - pad;
          if (sy < 0 || sy >= h) continue;
          double* dst = dx.data() + (static_cast<std::size_t>(c) * h + sy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            int sx = ox * stride + j - pad;
            if (sx < 0 || sx >= w) continue;
            dst[sx] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var Tape::conv2d(Var x, Var w, Var b, int stride, int pad) {
  check_arg(x.shape().size() == 3, "conv2d: input must be [c,h,w]");
  check_arg(w.shape().size() == 4, "conv2d: weight must be [cout,cin,kh,kw]");
  int cin = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
  int cout = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  check_arg(w.shape()[1] == cin, "conv2d: channel mismatch, input ", cin,
            " vs weight ", w.shape()[1]);
  check_arg(b.shape() == Shape{cout}, "conv2d: bias shape mismatch");
  check_arg(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  int oh = (h + 2 * pad - kh) / stride + 1;
  int ow = (wd + 2 * pad - kw) / stride + 1;
  check_arg(oh > 0 && ow > 0, "conv2d: kernel larger than padded input");

  int kdim = cin * kh * kw;
  int osp = oh * ow;
  std::vector<double> col;
  im2col(val(x), cin, h, wd, kh, kw, stride, pad, oh, ow, col);
  std::vector<double> out(static_cast<std::size_t>(cout) * osp);
  {
    CMapRM mw(val(w).data(), cout, kdim);
    CMapRM mc(col.data(), kdim, osp);
    MapRM mo(out.data(), cout, osp);
    mo.noalias() = mw * mc;
    const auto& vb = val(b);
    for (int c = 0; c < cout; ++c) mo.row(c).array() += vb[c];
  }
  int ix = x.index(), iw = w.index(), ib = b.index(), io = size();
  bool needs = rg(x) || rg(w) || rg(b);
  return emit({cout, oh, ow}, std::move(out), needs,
              [this, ix, iw, ib, io, cin, h, wd, cout, kh, kw, stride, pad,
               oh, ow, kdim, osp] {
                CMapRM g(node(io).grad.data(), cout, osp);
                if (node(ib).requires_grad) {
                  auto& gb = grad_buf(ib);
                  for (int c = 0; c < cout; ++c) gb[c] += g.row(c).sum();
                }
                if (node(iw).requires_grad) {
                  std::vector<double> col;
                  im2col(node(ix).value, cin, h, wd, kh, kw, stride, pad, oh,
                         ow, col);
                  CMapRM mc(col.data(), kdim, osp);
                  MapRM gw(grad_buf(iw).data(), cout, kdim);
                  gw.noalias() += g * mc.transpose();
                }
                if (node(ix).requires_grad) {
                  std::vector<double> dcol(static_cast<std::size_t>(kdim) *
                                           osp);
                  CMapRM mw(node(iw).value.data(), cout, kdim);
                  MapRM mdc(dcol.data(), kdim, osp);
                  mdc.noalias() = mw.transpose() * g;
                  col2im_add(dcol, cin, h, wd, kh, kw, stride, pad, oh, ow,
                             grad_buf(ix));
                }
              });
}

Var Tape::avgpool2x2(Var x) {
  check_arg(x.shape().size() == 3, "avgpool2x2: input must be [c,h,w]");
  int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  check_arg(h % 2 == 0 && w % 2 == 0, "avgpool2x2: odd spatial dims ", h, "x",
            w);
  int oh = h / 2, ow = w / 2;
  const auto& vx = val(x);
  std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        std::size_t base = (static_cast<std::size_t>(ch) * h + 2 * oy) * w +
                           2 * ox;
        out[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] =
            0.25 * (vx[base] + vx[base + 1] + vx[base + w] + vx[base + w + 1]);
      }
  int ix = x.index(), io = size();
  return emit({c, oh, ow}, std::move(out), rg(x),
              [this, ix, io, c, h, w, oh, ow] {
                const auto& g = node(io).grad;
                auto& gx = grad_buf(ix);
                for (int ch = 0; ch < c; ++ch)
                  for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                      double gv =
                          0.25 *
                          g[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox];
                      std::size_t base =
                          (static_cast<std::size_t>(ch) * h + 2 * oy) * w +
                          2 * ox;
                      gx[base] += gv;
                      gx[base + 1] += gv;
                      gx[base + w] += gv;
                      gx[base + w + 1] += gv;
                    }
              });
}

Var Tape::maxpool2x2(Var x) {
  check_arg(x.shape().size() == 3, "maxpool2x2: input must be [c,h,w]");
  int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  check_arg(h % 2 == 0 && w % 2 == 0, "maxpool2x2: odd spatial dims");
  int oh = h / 2, ow = w / 2;
  const auto& vx = val(x);
  std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        std::size_t base =
            (static_cast<std::size_t>(ch) * h + 2 * oy) * w + 2 * ox;
        std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int k = 1; k < 4; ++k)
          if (vx[cand[k]] > vx[best]) best = cand[k];
        std::size_t oi = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
        out[oi] = vx[best];
        (*argmax)[oi] = best;
      }
  int ix = x.index(), io = size();
  return emit({c, oh, ow}, std::move(out), rg(x), [this, ix, io, argmax] {
    const auto& g = node(io).grad;
    auto& gx = grad_buf(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
  });
}

Var Tape::instance_norm(Var x, Var gamma, Var beta, double eps) {
  check_arg(x.shape().size() == 3, "instance_norm: input must be [c,h,w]");
  int c = x.shape()[0], n = x.shape()[1] * x.shape()[2];
  check_arg(gamma.shape() == Shape{c} && beta.shape() == Shape{c},
            "instance_norm: affine param shape mismatch");
  const auto& vx = val(x);
  const auto& vg = val(gamma);
  const auto& vb = val(beta);
  std::vector<double> out(vx.size());
  auto stats = std::make_shared<std::vector<double>>(2 * c);  // mu, inv_std
  for (int ch = 0; ch < c; ++ch) {
    const double* src = vx.data() + static_cast<std::size_t>(ch) * n;
    double mu = 0;
    for (int i = 0; i < n; ++i) mu += src[i];
    mu /= n;
    double var = 0;
    for (int i = 0; i < n; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= n;
    double inv_std = 1.0 / std::sqrt(var + eps);
    (*stats)[2 * ch] = mu;
    (*stats)[2 * ch + 1] = inv_std;
    double* dst = out.data() + static_cast<std::size_t>(ch) * n;
    for (int i = 0; i < n; ++i)
      dst[i] = vg[ch] * (src[i] - mu) * inv_std + vb[ch];
  }
  int ix = x.index(), ig = gamma.index(), ib = beta.index(), io = size();
  bool needs = rg(x) || rg(gamma) || rg(beta);
  return emit(x.shape(), std::move(out), needs,
              [this, ix, ig, ib, io, c, n, stats] {
                const auto& g = node(io).grad;
                const auto& vx2 = node(ix).value;
                const auto& vg2 = node(ig).value;
                for (int ch = 0; ch < c; ++ch) {
                  double mu = (*stats)[2 * ch];
                  double inv_std = (*stats)[2 * ch + 1];
                  const double* src = vx2.data() + static_cast<std::size_t>(ch) * n;
                  const double* gr = g.data() + static_cast<std::size_t>(ch) * n;
                  double sum_g = 0, sum_gx = 0;
                  for (int i = 0; i < n; ++i) {
                    double xh = (src[i] - mu) * inv_std;
                    sum_g += gr[i];
                    sum_gx += gr[i] * xh;
                  }
                  if (node(ig).requires_grad) grad_buf(ig)[ch] += sum_gx;
                  if (node(ib).requires_grad) grad_buf(ib)[ch] += sum_g;
                  if (node(ix).requires_grad) {
                    auto& gx = grad_buf(ix);
                    double* dst = gx.data() + static_cast<std::size_t>(ch) * n;
                    double k = vg2[ch] * inv_std;
                    double mg = sum_g / n, mgx = sum_gx / n;
                    for (int i = 0; i < n; ++i) {
                      double xh = (src[i] - mu) * inv_std;
                      dst[i] += k * (gr[i] - mg - xh * mgx);
                    }
                  }
                }
              });
}

namespace {

void sample_corners(double u, int limit, int& i0, int& i1, double& frac,
                    bool& interior) {
  i0 = static_cast<int>(std::floor(u));
  frac = u - i0;
  interior = u > 0.0 && u < limit - 1.0;
  i1 = std::clamp(i0 + 1, 0, limit - 1);
  i0 = std::clamp(i0, 0, limit - 1);
}

}  // namespace

Var Tape::bilinear_sample(Var f, Var coords) {
  check_arg(f.shape().size() == 3, "bilinear_sample: features must be [c,h,w]");
  check_arg(coords.shape().size() == 2 && coords.shape()[1] == 2,
            "bilinear_sample: coords must be [j,2]");
  int c = f.shape()[0], h = f.shape()[1], w = f.shape()[2];
  int j = coords.shape()[0];
  const auto& vf = val(f);
  const auto& vc = val(coords);
  std::vector<double> out(static_cast<std::size_t>(j) * c);

  for (int jj = 0; jj < j; ++jj) {
    double u = vc[jj * 2 + 0] - 0.5;  // cell centers at integer + 0.5
    double v = vc[jj * 2 + 1] - 0.5;
    int x0, x1, y0, y1;
    double wx, wy;
    bool ix_in, iy_in;
    sample_corners(u, w, x0, x1, wx, ix_in);
    sample_corners(v, h, y0, y1, wy, iy_in);
    wx = std::clamp(wx, 0.0, 1.0);
    wy = std::clamp(wy, 0.0, 1.0);
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = vf.data() + static_cast<std::size_t>(ch) * h * w;
      double v00 = plane[y0 * w + x0], v01 = plane[y0 * w + x1];
      double v10 = plane[y1 * w + x0], v11 = plane[y1 * w + x1];
      out[static_cast<std::size_t>(jj) * c + ch] =
          (1 - wy) * ((1 - wx) * v00 + wx * v01) +
          wy * ((1 - wx) * v10 + wx * v11);
    }
  }
  int iff = f.index(), ic = coords.index(), io = size();
  bool needs = rg(f) || rg(coords);
  return emit({j, c}, std::move(out), needs, [this, iff, ic, io, c, h, w, j] {
    const auto& g = node(io).grad;
    const auto& vf2 = node(iff).value;
    const auto& vc2 = node(ic).value;
    for (int jj = 0; jj < j; ++jj) {
      double u = vc2[jj * 2 + 0] - 0.5;
      double v = vc2[jj * 2 + 1] - 0.5;
      int x0, x1, y0, y1;
      double wx, wy;
      bool ix_in, iy_in;
      sample_corners(u, w, x0, x1, wx, ix_in);
      sample_corners(v, h, y0, y1, wy, iy_in);
      double wxc = std::clamp(wx, 0.0, 1.0);
      double wyc = std::clamp(wy, 0.0, 1.0);
      double du = 0, dv = 0;
      for (int ch = 0; ch < c; ++ch) {
        double gv = g[static_cast<std::size_t>(jj) * c + ch];
        if (gv == 0) continue;
        const double* plane =
            vf2.data() + static_cast<std::size_t>(ch) * h * w;
        double v00 = plane[y0 * w + x0], v01 = plane[y0 * w + x1];
        double v10 = plane[y1 * w + x0], v11 = plane[y1 * w + x1];
        if (node(iff).requires_grad) {
          auto& gf = grad_buf(iff);
          double* gp = gf.data() + static_cast<std::size_t>(ch) * h * w;
          gp[y0 * w + x0] += gv * (1 - wyc) * (1 - wxc);
          gp[y0 * w + x1] += gv * (1 - wyc) * wxc;
          gp[y1 * w + x0] += gv * wyc * (1 - wxc);
          gp[y1 * w + x1] += gv * wyc * wxc;
        }
        if (node(ic).requires_grad) {
          if (ix_in) du += gv * ((1 - wyc) * (v01 - v00) + wyc * (v11 - v10));
          if (iy_in) dv += gv * ((1 - wxc) * (v10 - v00) + wxc * (v11 - v01));
        }
      }
      if (node(ic).requires_grad) {
        auto& gc = grad_buf(ic);
        gc[jj * 2 + 0] += du;
        gc[jj * 2 + 1] += dv;
      }
    }
  });
}

Var Tape::scale_by(Var x, Var s) {
  check_arg(s.numel() == 1, "scale_by: scale must be scalar");
  double sv = val(s)[0];
  const auto& vx = val(x);
  std::vector<double> out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] * sv;
  int ix = x.index(), is = s.index(), io = size();
  bool needs = rg(x) || rg(s);
  return emit(x.shape(), std::move(out), needs, [this, ix, is, io] {
    const auto& g = node(io).grad;
    const auto& vx2 = node(ix).value;
    double sv2 = node(is).value[0];
    if (node(ix).requires_grad) {
      auto& gx = grad_buf(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv2;
    }
    if (node(is).requires_grad) {
      double acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * vx2[i];
      grad_buf(is)[0] += acc;
    }
  });
}

Var Tape::add_broadcast_row(Var x, Var t) {
  check_arg(x.shape().size() == 2, "add_broadcast_row: x must be 2-d");
  int n = x.shape()[0], k = x.shape()[1];
  check_arg(t.shape() == Shape{k}, "add_broadcast_row: t shape mismatch");
  const auto& vx = val(x);
  const auto& vt = val(t);
  std::vector<double> out(vx.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out[i * k + j] = vx[i * k + j] + vt[j];
  int ix = x.index(), it = t.index(), io = size();
  bool needs = rg(x) || rg(t);
  return emit(x.shape(), std::move(out), needs, [this, ix, it, io, n, k] {
    const auto& g = node(io).grad;
    if (node(ix).requires_grad) {
      auto& gx = grad_buf(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (node(it).requires_grad) {
      auto& gt = grad_buf(it);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) gt[j] += g[i * k + j];
    }
  });
}

Var Tape::scale_rows(Var x, Var s) {
  check_arg(!x.shape().empty(), "scale_rows: scalar input");
  int n = x.shape()[0];
  check_arg(s.shape() == Shape{n}, "scale_rows: scale shape mismatch, want [",
            n, "]");
  int block = x.numel() / n;
  const auto& vx = val(x);
  const auto& vs = val(s);
  std::vector<double> out(vx.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < block; ++j) out[i * block + j] = vx[i * block + j] * vs[i];
  int ix = x.index(), is = s.index(), io = size();
  bool needs = rg(x) || rg(s);
  return emit(x.shape(), std::move(out), needs, [this, ix, is, io, n, block] {
    const auto& g = node(io).grad;
    const auto& vx2 = node(ix).value;
    const auto& vs2 = node(is).value;
    if (node(ix).requires_grad) {
      auto& gx = grad_buf(ix);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < block; ++j) gx[i * block + j] += g[i * block + j] * vs2[i];
    }
    if (node(is).requires_grad) {
      auto& gs = grad_buf(is);
      for (int i = 0; i < n; ++i) {
        double acc = 0;
        for (int j = 0; j < block; ++j) acc += g[i * block + j] * vx2[i * block + j];
        gs[i] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// geometry

Var Tape::sinc_theta(Var s) {
  const auto& vs = val(s);
  std::vector<double> out(vs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rodrigues_k1(vs[i]);
  int is = s.index(), io = size();
  return emit(s.shape(), std::move(out), rg(s), [this, is, io] {
    const auto& g = node(io).grad;
    const auto& vs2 = node(is).value;
    auto& gs = grad_buf(is);
    for (std::size_t i = 0; i < g.size(); ++i)
      gs[i] += g[i] * rodrigues_dk1(vs2[i]);
  });
}

Var Tape::versine_ratio(Var s) {
  const auto& vs = val(s);
  std::vector<double> out(vs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rodrigues_k2(vs[i]);
  int is = s.index(), io = size();
  return emit(s.shape(), std::move(out), rg(s), [this, is, io] {
    const auto& g = node(io).grad;
    const auto& vs2 = node(is).value;
    auto& gs = grad_buf(is);
    for (std::size_t i = 0; i < g.size(); ++i)
      gs[i] += g[i] * rodrigues_dk2(vs2[i]);
  });
}

Var Tape::row_outer(Var v) {
  check_arg(v.shape().size() == 2 && v.shape()[1] == 3,
            "row_outer expects [n,3]");
  int n = v.shape()[0];
  const auto& vv = val(v);
  std::vector<double> out(static_cast<std::size_t>(n) * 9);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        out[i * 9 + a * 3 + b] = vv[i * 3 + a] * vv[i * 3 + b];
  int iv = v.index(), io = size();
  return emit({n, 3, 3}, std::move(out), rg(v), [this, iv, io, n] {
    const auto& g = node(io).grad;
    const auto& vv2 = node(iv).value;
    auto& gv = grad_buf(iv);
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) {
        double acc = 0;
        for (int b = 0; b < 3; ++b)
          acc += (g[i * 9 + a * 3 + b] + g[i * 9 + b * 3 + a]) * vv2[i * 3 + b];
        gv[i * 3 + a] += acc;
      }
  });
}

Var Tape::make_affine(Var rot, Var t) {
  bool batched = rot.shape().size() == 3;
  int n = batched ? rot.shape()[0] : 1;
  if (batched) {
    check_arg(rot.shape()[1] == 3 && rot.shape()[2] == 3,
              "make_affine: rot must be [n,3,3]");
    check_arg(t.shape() == Shape{n, 3}, "make_affine: t must be [n,3]");
  } else {
    check_arg(rot.shape() == Shape{3, 3}, "make_affine: rot must be [3,3]");
    check_arg(t.shape() == Shape{3}, "make_affine: t must be [3]");
  }
  const auto& vr = val(rot);
  const auto& vt = val(t);
  std::vector<double> out(static_cast<std::size_t>(n) * 16, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out[i * 16 + r * 4 + c] = vr[i * 9 + r * 3 + c];
      out[i * 16 + r * 4 + 3] = vt[i * 3 + r];
    }
    out[i * 16 + 15] = 1.0;
  }
  Shape out_shape = batched ? Shape{n, 4, 4} : Shape{4, 4};
  int ir = rot.index(), it = t.index(), io = size();
  bool needs = rg(rot) || rg(t);
  return emit(std::move(out_shape), std::move(out), needs,
              [this, ir, it, io, n] {
                const auto& g = node(io).grad;
                if (node(ir).requires_grad) {
                  auto& gr = grad_buf(ir);
                  for (int i = 0; i < n; ++i)
                    for (int r = 0; r < 3; ++r)
                      for (int c = 0; c < 3; ++c)
                        gr[i * 9 + r * 3 + c] += g[i * 16 + r * 4 + c];
                }
                if (node(it).requires_grad) {
                  auto& gt = grad_buf(it);
                  for (int i = 0; i < n; ++i)
                    for (int r = 0; r < 3; ++r)
                      gt[i * 3 + r] += g[i * 16 + r * 4 + 3];
                }
              });
}

Var Tape::apply_affine_rows(Var a, Var x) {
  check_arg(a.shape().size() == 2 && a.shape()[1] == 16,
            "apply_affine_rows: a must be [n,16]");
  int n = a.shape()[0];
  check_arg(x.shape() == Shape{n, 3}, "apply_affine_rows: x must be [n,3]");
  const auto& va = val(a);
  const auto& vx = val(x);
  std::vector<double> out(static_cast<std::size_t>(n) * 3);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < 3; ++r) {
      const double* row = va.data() + i * 16 + r * 4;
      out[i * 3 + r] = row[0] * vx[i * 3] + row[1] * vx[i * 3 + 1] +
                       row[2] * vx[i * 3 + 2] + row[3];
    }
  int ia = a.index(), ix = x.index(), io = size();
  bool needs = rg(a) || rg(x);
  return emit({n, 3}, std::move(out), needs, [this, ia, ix, io, n] {
    const auto& g = node(io).grad;
    const auto& va2 = node(ia).value;
    const auto& vx2 = node(ix).value;
    if (node(ia).requires_grad) {
      auto& ga = grad_buf(ia);
      for (int i = 0; i < n; ++i)
        for (int r = 0; r < 3; ++r) {
          double gv = g[i * 3 + r];
          for (int c = 0; c < 3; ++c) ga[i * 16 + r * 4 + c] += gv * vx2[i * 3 + c];
          ga[i * 16 + r * 4 + 3] += gv;
        }
    }
    if (node(ix).requires_grad) {
      auto& gx = grad_buf(ix);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
          double acc = 0;
          for (int r = 0; r < 3; ++r) acc += g[i * 3 + r] * va2[i * 16 + r * 4 + c];
          gx[i * 3 + c] += acc;
        }
    }
  });
}

Var Tape::rot6d_to_matrix_rows(Var r, std::vector<std::uint8_t>* degenerate) {
  check_arg(r.shape().size() == 2 && r.shape()[1] == 6,
            "rot6d_to_matrix_rows expects [n,6]");
  int n = r.shape()[0];
  const auto& vr = val(r);
  std::vector<double> out(static_cast<std::size_t>(n) * 9, 0.0);
  auto flags = std::make_shared<std::vector<std::uint8_t>>(n, 0);
  for (int i = 0; i < n; ++i) {
    Eigen::Map<const Eigen::Matrix<double, 6, 1>> row(vr.data() + i * 6);
    Rot6dResult res = rot6d_to_matrix(row);
    (*flags)[i] = res.degenerate ? 1 : 0;
    for (int rr = 0; rr < 3; ++rr)
      for (int cc = 0; cc < 3; ++cc)
        out[i * 9 + rr * 3 + cc] = res.rotation(rr, cc);
  }
  if (degenerate) *degenerate = *flags;
  int ir = r.index(), io = size();
  return emit({n, 3, 3}, std::move(out), rg(r), [this, ir, io, n, flags] {
    const auto& g = node(io).grad;
    const auto& vr2 = node(ir).value;
    auto& gr = grad_buf(ir);
    for (int i = 0; i < n; ++i) {
      if ((*flags)[i]) continue;  // identity fallback carries no gradient
      Eigen::Vector3d u(vr2[i * 6], vr2[i * 6 + 1], vr2[i * 6 + 2]);
      Eigen::Vector3d w(vr2[i * 6 + 3], vr2[i * 6 + 4], vr2[i * 6 + 5]);
      double un = u.norm();
      Eigen::Vector3d a = u / un;
      Eigen::Vector3d wp = w - a.dot(w) * a;
      double pn = wp.norm();
      Eigen::Vector3d b = wp / pn;
      // gradient of the output matrix w.r.t. columns a, b, c
      Eigen::Vector3d ga, gb, gc;
      for (int k = 0; k < 3; ++k) {
        ga[k] = g[i * 9 + k * 3 + 0];
        gb[k] = g[i * 9 + k * 3 + 1];
        gc[k] = g[i * 9 + k * 3 + 2];
      }
      ga += b.cross(gc);
      gb += gc.cross(a);
      Eigen::Vector3d gwp = (gb - b * b.dot(gb)) / pn;
      ga += -(a.dot(gwp)) * w - a.dot(w) * gwp;
      Eigen::Vector3d gw = gwp - a * a.dot(gwp);
      Eigen::Vector3d gu = (ga - a * a.dot(ga)) / un;
      for (int k = 0; k < 3; ++k) {
        gr[i * 6 + k] += gu[k];
        gr[i * 6 + 3 + k] += gw[k];
      }
    }
  });
}

Var Tape::axis_angle_to_matrix_rows(Var v) {
  check_arg(v.shape().size() == 2 && v.shape()[1] == 3,
            "axis_angle_to_matrix_rows expects [n,3]");
  int n = v.shape()[0];
  Var s = rowsum(mul(v, v));
  Var k1 = sinc_theta(s);
  Var k2 = versine_ratio(s);
  // skew(v) flattened row-major is a fixed linear map of v
  std::vector<double> skew_map(27, 0.0);  // [3,9]
  skew_map[2 * 9 + 1] = -1;  // out1 = -v2
  skew_map[1 * 9 + 2] = 1;   // out2 =  v1
  skew_map[2 * 9 + 3] = 1;   // out3 =  v2
  skew_map[0 * 9 + 5] = -1;  // out5 = -v0
  skew_map[1 * 9 + 6] = -1;  // out6 = -v1
  skew_map[0 * 9 + 7] = 1;   // out7 =  v0
  Var k_mat = matmul(v, constant({3, 9}, std::move(skew_map)));  // [n,9]
  Var outer = reshape(row_outer(v), {n, 9});
  std::vector<double> eye(static_cast<std::size_t>(n) * 9, 0.0);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < 3; ++d) eye[i * 9 + d * 3 + d] = 1.0;
  Var identity = constant({n, 9}, std::move(eye));
  Var ones = constant({n}, std::vector<double>(n, 1.0));
  Var diag_coeff = sub(ones, mul(k2, s));  // 1 - k2 * s
  Var result = add(add(scale_rows(k_mat, k1), scale_rows(outer, k2)),
                   scale_rows(identity, diag_coeff));
  return reshape(result, {n, 3, 3});
}

}  // namespace meev::ad

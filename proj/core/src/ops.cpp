#include "mhqg/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mhqg/common.hpp"

namespace mhqg::num {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                   b.shape_str());
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw ShapeError(std::string(op) + ": unsupported shape " + a.shape_str());
}

}  // namespace

Var constant(Tape& tape, Tensor value) { return tape.constant(std::move(value)); }

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);

  if (A.rank() == 2 && B.rank() == 2) {
    if (A.extent(1) != B.extent(0)) shape_fail("matmul", A, B);
    const std::size_t m = A.extent(0), k = A.extent(1), n = B.extent(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A.at(i, p);
        if (aip == 0.0) continue;
        const double* brow = B.data() + p * n;
        double* orow = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
    return t.emit(std::move(out), {a, b}, [ai = a.id, bi = b.id, m, k, n](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      const Tensor& Av = tp.value(ai);
      const Tensor& Bv = tp.value(bi);
      if (tp.needs_grad(ai)) {
        Tensor& dA = tp.grad_acc(ai);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = G.at(i, j);
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) dA.at(i, p) += g * Bv.at(p, j);
          }
      }
      if (tp.needs_grad(bi)) {
        Tensor& dB = tp.grad_acc(bi);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = Av.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) dB.at(p, j) += av * G.at(i, j);
          }
      }
    });
  }

  if (A.rank() == 2 && B.rank() == 1) {
    if (A.extent(1) != B.extent(0)) shape_fail("matmul", A, B);
    const std::size_t m = A.extent(0), k = A.extent(1);
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* arow = A.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * B.at(p);
      out.at(i) = acc;
    }
    return t.emit(std::move(out), {a, b}, [ai = a.id, bi = b.id, m, k](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      const Tensor& Av = tp.value(ai);
      const Tensor& Bv = tp.value(bi);
      if (tp.needs_grad(ai)) {
        Tensor& dA = tp.grad_acc(ai);
        for (std::size_t i = 0; i < m; ++i) {
          const double g = G.at(i);
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) dA.at(i, p) += g * Bv.at(p);
        }
      }
      if (tp.needs_grad(bi)) {
        Tensor& dB = tp.grad_acc(bi);
        for (std::size_t i = 0; i < m; ++i) {
          const double g = G.at(i);
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) dB.at(p) += g * Av.at(i, p);
        }
      }
    });
  }

  if (A.rank() == 1 && B.rank() == 2) {
    if (A.extent(0) != B.extent(0)) shape_fail("matmul", A, B);
    const std::size_t k = A.extent(0), n = B.extent(1);
    Tensor out({n});
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A.at(p);
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) out.at(j) += av * brow[j];
    }
    return t.emit(std::move(out), {a, b}, [ai = a.id, bi = b.id, k, n](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      const Tensor& Av = tp.value(ai);
      const Tensor& Bv = tp.value(bi);
      if (tp.needs_grad(ai)) {
        Tensor& dA = tp.grad_acc(ai);
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G.at(j) * Bv.at(p, j);
          dA.at(p) += acc;
        }
      }
      if (tp.needs_grad(bi)) {
        Tensor& dB = tp.grad_acc(bi);
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av.at(p);
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) dB.at(p, j) += av * G.at(j);
        }
      }
    });
  }

  shape_fail("matmul", A, B);
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (A.rank() != 2) shape_fail("transpose", A);
  const std::size_t m = A.extent(0), n = A.extent(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
  return t.emit(std::move(out), {a}, [ai = a.id, m, n](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dA.at(i, j) += G.at(j, i);
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);

  if (A.same_shape(B)) {
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += B.at(i);
    return t.emit(std::move(out), {a, b}, [ai = a.id, bi = b.id](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      if (tp.needs_grad(ai)) {
        Tensor& dA = tp.grad_acc(ai);
        for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i);
      }
      if (tp.needs_grad(bi)) {
        Tensor& dB = tp.grad_acc(bi);
        for (std::size_t i = 0; i < G.size(); ++i) dB.at(i) += G.at(i);
      }
    });
  }

  // Bias broadcast along the last axis: (m,n) + (n,).
  if (A.rank() == 2 && B.rank() == 1 && A.extent(1) == B.extent(0)) {
    const std::size_t m = A.extent(0), n = A.extent(1);
    Tensor out = A;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += B.at(j);
    return t.emit(std::move(out), {a, b}, [ai = a.id, bi = b.id, m, n](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      if (tp.needs_grad(ai)) {
        Tensor& dA = tp.grad_acc(ai);
        for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i);
      }
      if (tp.needs_grad(bi)) {
        Tensor& dB = tp.grad_acc(bi);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) dB.at(j) += G.at(i, j);
      }
    });
  }

  shape_fail("add", A, B);
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B)) shape_fail("sub", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) -= B.at(i);
  return t.emit(std::move(out), {a, b}, [ai = a.id, bi = b.id](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    if (tp.needs_grad(ai)) {
      Tensor& dA = tp.grad_acc(ai);
      for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i);
    }
    if (tp.needs_grad(bi)) {
      Tensor& dB = tp.grad_acc(bi);
      for (std::size_t i = 0; i < G.size(); ++i) dB.at(i) -= G.at(i);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B)) shape_fail("mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= B.at(i);
  return t.emit(std::move(out), {a, b}, [ai = a.id, bi = b.id](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    const Tensor& Av = tp.value(ai);
    const Tensor& Bv = tp.value(bi);
    if (tp.needs_grad(ai)) {
      Tensor& dA = tp.grad_acc(ai);
      for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i) * Bv.at(i);
    }
    if (tp.needs_grad(bi)) {
      Tensor& dB = tp.grad_acc(bi);
      for (std::size_t i = 0; i < G.size(); ++i) dB.at(i) += G.at(i) * Av.at(i);
    }
  });
}

Var scale_rows(Var m, Var v) {
  Tape& t = *m.tape;
  const Tensor& M = t.value(m);
  const Tensor& V = t.value(v);
  if (M.rank() != 2 || V.rank() != 1 || M.extent(0) != V.extent(0)) {
    shape_fail("scale_rows", M, V);
  }
  const std::size_t r = M.extent(0), c = M.extent(1);
  Tensor out = M;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) *= V.at(i);
  return t.emit(std::move(out), {m, v}, [mi = m.id, vi = v.id, r, c](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    const Tensor& Mv = tp.value(mi);
    const Tensor& Vv = tp.value(vi);
    if (tp.needs_grad(mi)) {
      Tensor& dM = tp.grad_acc(mi);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dM.at(i, j) += G.at(i, j) * Vv.at(i);
    }
    if (tp.needs_grad(vi)) {
      Tensor& dV = tp.grad_acc(vi);
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += G.at(i, j) * Mv.at(i, j);
        dV.at(i) += acc;
      }
    }
  });
}

Var scale(Var a, Var s) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& S = t.value(s);
  if (S.size() != 1) shape_fail("scale", A, S);
  const double sv = S.at(0);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= sv;
  return t.emit(std::move(out), {a, s}, [ai = a.id, si = s.id](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    const Tensor& Av = tp.value(ai);
    const double sval = tp.value(si).at(0);
    if (tp.needs_grad(ai)) {
      Tensor& dA = tp.grad_acc(ai);
      for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i) * sval;
    }
    if (tp.needs_grad(si)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < G.size(); ++i) acc += G.at(i) * Av.at(i);
      tp.grad_acc(si).at(0) += acc;
    }
  });
}

Var scale_const(Var a, double c) {
  Tape& t = *a.tape;
  Tensor out = t.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= c;
  return t.emit(std::move(out), {a}, [ai = a.id, c](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i) * c;
  });
}

Var reshape(Var a, std::vector<std::size_t> shape) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out(std::move(shape), A.values());  // ctor rejects a size mismatch
  return t.emit(std::move(out), {a}, [ai = a.id](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = *parts.front().tape;
  const std::size_t rank = t.value(parts.front()).rank();
  if (axis >= rank) throw ShapeError("concat: axis out of range");

  if (rank == 1) {
    std::size_t total = 0;
    for (const Var& p : parts) {
      if (t.value(p).rank() != 1) shape_fail("concat", t.value(p));
      total += t.value(p).size();
    }
    Tensor out({total});
    std::size_t off = 0;
    std::vector<std::size_t> offsets;
    for (const Var& p : parts) {
      offsets.push_back(off);
      const Tensor& P = t.value(p);
      std::copy(P.data(), P.data() + P.size(), out.data() + off);
      off += P.size();
    }
    std::vector<std::uint32_t> ids;
    for (const Var& p : parts) ids.push_back(p.id);
    return t.emit(std::move(out), parts, [ids, offsets](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (!tp.needs_grad(ids[k])) continue;
        Tensor& dP = tp.grad_acc(ids[k]);
        for (std::size_t i = 0; i < dP.size(); ++i) dP.at(i) += G.at(offsets[k] + i);
      }
    });
  }

  // rank 2
  const std::size_t other = axis == 0 ? 1 : 0;
  const std::size_t fixed = t.value(parts.front()).extent(other);
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Tensor& P = t.value(p);
    if (P.rank() != 2 || P.extent(other) != fixed) {
      shape_fail("concat", t.value(parts.front()), P);
    }
    total += P.extent(axis);
  }
  Tensor out(axis == 0 ? std::vector<std::size_t>{total, fixed}
                       : std::vector<std::size_t>{fixed, total});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = t.value(p);
    offsets.push_back(off);
    if (axis == 0) {
      std::copy(P.data(), P.data() + P.size(), out.data() + off * fixed);
    } else {
      for (std::size_t i = 0; i < fixed; ++i)
        for (std::size_t j = 0; j < P.extent(1); ++j) out.at(i, off + j) = P.at(i, j);
    }
    off += P.extent(axis);
  }
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    ids.push_back(p.id);
    extents.push_back(t.value(p).extent(axis));
  }
  return t.emit(std::move(out), parts,
                [ids, offsets, extents, axis, fixed](Tape& tp, std::uint32_t self) {
                  const Tensor& G = tp.grad_acc(self);
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (!tp.needs_grad(ids[k])) continue;
                    Tensor& dP = tp.grad_acc(ids[k]);
                    if (axis == 0) {
                      for (std::size_t i = 0; i < extents[k]; ++i)
                        for (std::size_t j = 0; j < fixed; ++j)
                          dP.at(i, j) += G.at(offsets[k] + i, j);
                    } else {
                      for (std::size_t i = 0; i < fixed; ++i)
                        for (std::size_t j = 0; j < extents[k]; ++j)
                          dP.at(i, j) += G.at(i, offsets[k] + j);
                    }
                  }
                });
}

Var stack_rows(const std::vector<Var>& rows_in) {
  if (rows_in.empty()) throw ShapeError("stack_rows: no inputs");
  Tape& t = *rows_in.front().tape;
  const std::size_t d = t.value(rows_in.front()).size();
  for (const Var& r : rows_in) {
    const Tensor& R = t.value(r);
    if (R.rank() != 1 || R.size() != d) shape_fail("stack_rows", t.value(rows_in.front()), R);
  }
  Tensor out({rows_in.size(), d});
  for (std::size_t i = 0; i < rows_in.size(); ++i) {
    const Tensor& R = t.value(rows_in[i]);
    std::copy(R.data(), R.data() + d, out.data() + i * d);
  }
  std::vector<std::uint32_t> ids;
  for (const Var& r : rows_in) ids.push_back(r.id);
  return t.emit(std::move(out), rows_in, [ids, d](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!tp.needs_grad(ids[i])) continue;
      Tensor& dR = tp.grad_acc(ids[i]);
      for (std::size_t j = 0; j < d; ++j) dR.at(j) += G.at(i, j);
    }
  });
}

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t len) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (axis >= A.rank() || start + len > A.extent(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for shape " + A.shape_str());
  }
  if (A.rank() == 1) {
    Tensor out({len});
    std::copy(A.data() + start, A.data() + start + len, out.data());
    return t.emit(std::move(out), {a}, [ai = a.id, start, len](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      Tensor& dA = tp.grad_acc(ai);
      for (std::size_t i = 0; i < len; ++i) dA.at(start + i) += G.at(i);
    });
  }
  const std::size_t m = A.extent(0), n = A.extent(1);
  if (axis == 0) {
    Tensor out({len, n});
    std::copy(A.data() + start * n, A.data() + (start + len) * n, out.data());
    return t.emit(std::move(out), {a}, [ai = a.id, start, len, n](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      Tensor& dA = tp.grad_acc(ai);
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < n; ++j) dA.at(start + i, j) += G.at(i, j);
    });
  }
  Tensor out({m, len});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < len; ++j) out.at(i, j) = A.at(i, start + j);
  return t.emit(std::move(out), {a}, [ai = a.id, start, len, m](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < len; ++j) dA.at(i, start + j) += G.at(i, j);
  });
}

Var pick(Var a, std::size_t index) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (A.rank() != 1 || index >= A.size()) {
    throw ShapeError("pick: index " + std::to_string(index) + " out of bounds for shape " +
                     A.shape_str());
  }
  return t.emit(Tensor::scalar(A.at(index)), {a}, [ai = a.id, index](Tape& tp, std::uint32_t self) {
    tp.grad_acc(ai).at(index) += tp.grad_acc(self).at(0);
  });
}

Var rows(Var a, std::vector<std::size_t> indices) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (A.rank() != 2) shape_fail("rows", A);
  const std::size_t n = A.extent(0), d = A.extent(1);
  for (std::size_t idx : indices) {
    if (idx >= n) {
      throw ShapeError("rows: index " + std::to_string(idx) + " out of bounds for shape " +
                       A.shape_str());
    }
  }
  Tensor out({indices.size(), d});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy(A.data() + indices[i] * d, A.data() + (indices[i] + 1) * d, out.data() + i * d);
  }
  return t.emit(std::move(out), {a},
                [ai = a.id, idx = std::move(indices), d](Tape& tp, std::uint32_t self) {
                  const Tensor& G = tp.grad_acc(self);
                  Tensor& dA = tp.grad_acc(ai);
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    for (std::size_t j = 0; j < d; ++j) dA.at(idx[i], j) += G.at(i, j);
                });
}

Var scatter_add(Var src, std::vector<std::size_t> indices, std::size_t out_rows) {
  Tape& t = *src.tape;
  const Tensor& S = t.value(src);
  if (S.extent(0) != indices.size()) {
    throw ShapeError("scatter_add: " + std::to_string(indices.size()) + " indices for shape " +
                     S.shape_str());
  }
  for (std::size_t idx : indices) {
    if (idx >= out_rows) {
      throw ShapeError("scatter_add: index " + std::to_string(idx) + " out of bounds for " +
                       std::to_string(out_rows) + " rows");
    }
  }
  if (S.rank() == 1) {
    Tensor out({out_rows});
    for (std::size_t i = 0; i < indices.size(); ++i) out.at(indices[i]) += S.at(i);
    return t.emit(std::move(out), {src},
                  [si = src.id, idx = std::move(indices)](Tape& tp, std::uint32_t self) {
                    const Tensor& G = tp.grad_acc(self);
                    Tensor& dS = tp.grad_acc(si);
                    for (std::size_t i = 0; i < idx.size(); ++i) dS.at(i) += G.at(idx[i]);
                  });
  }
  const std::size_t d = S.extent(1);
  Tensor out({out_rows, d});
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(indices[i], j) += S.at(i, j);
  return t.emit(std::move(out), {src},
                [si = src.id, idx = std::move(indices), d](Tape& tp, std::uint32_t self) {
                  const Tensor& G = tp.grad_acc(self);
                  Tensor& dS = tp.grad_acc(si);
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    for (std::size_t j = 0; j < d; ++j) dS.at(i, j) += G.at(idx[i], j);
                });
}

namespace {

template <typename Fwd, typename Bwd>
Var unary_from_output(Var a, Fwd fwd, Bwd bwd_from_y) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = fwd(out.at(i));
  return t.emit(std::move(out), {a}, [ai = a.id, bwd_from_y](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    const Tensor& Y = tp.value(self);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i) * bwd_from_y(Y.at(i));
  });
}

}  // namespace

Var sigmoid(Var a) {
  return unary_from_output(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_from_output(
      a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::max(0.0, out.at(i));
  return t.emit(std::move(out), {a}, [ai = a.id](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    const Tensor& X = tp.value(ai);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < G.size(); ++i) {
      if (X.at(i) > 0.0) dA.at(i) += G.at(i);
    }
  });
}

Var log(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::log(out.at(i));
  return t.emit(std::move(out), {a}, [ai = a.id](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    const Tensor& X = tp.value(ai);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < G.size(); ++i) dA.at(i) += G.at(i) / X.at(i);
  });
}

Var softmax(Var a, std::size_t axis) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (axis >= A.rank()) throw ShapeError("softmax: axis out of range for shape " + A.shape_str());

  // Slices run along `axis`; there are `slices` of them, each of length `len`
  // with the given stride.
  const bool is1d = A.rank() == 1;
  const std::size_t len = A.extent(axis);
  const std::size_t slices = is1d ? 1 : A.extent(1 - axis);
  const std::size_t stride = is1d ? 1 : (axis == 0 ? A.extent(1) : 1);
  const std::size_t slice_stride = is1d ? 0 : (axis == 0 ? 1 : A.extent(1));

  Tensor out = A;
  for (std::size_t s = 0; s < slices; ++s) {
    double* p = out.data() + s * slice_stride;
    double mx = p[0];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, p[i * stride]);
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(p[i * stride] - mx);
      p[i * stride] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < len; ++i) p[i * stride] /= sum;
  }
  return t.emit(std::move(out), {a},
                [ai = a.id, len, slices, stride, slice_stride](Tape& tp, std::uint32_t self) {
                  const Tensor& G = tp.grad_acc(self);
                  const Tensor& Y = tp.value(self);
                  Tensor& dA = tp.grad_acc(ai);
                  for (std::size_t s = 0; s < slices; ++s) {
                    const std::size_t base = s * slice_stride;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < len; ++i) {
                      dot += G.at(base + i * stride) * Y.at(base + i * stride);
                    }
                    for (std::size_t i = 0; i < len; ++i) {
                      const std::size_t k = base + i * stride;
                      dA.at(k) += Y.at(k) * (G.at(k) - dot);
                    }
                  }
                });
}

Var mean(Var a, std::size_t axis) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (axis >= A.rank()) throw ShapeError("mean: axis out of range for shape " + A.shape_str());

  if (A.rank() == 1) {
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += A.at(i);
    const double inv = 1.0 / static_cast<double>(A.size());
    return t.emit(Tensor::scalar(acc * inv), {a}, [ai = a.id, inv](Tape& tp, std::uint32_t self) {
      const double g = tp.grad_acc(self).at(0) * inv;
      Tensor& dA = tp.grad_acc(ai);
      for (std::size_t i = 0; i < dA.size(); ++i) dA.at(i) += g;
    });
  }

  const std::size_t m = A.extent(0), n = A.extent(1);
  if (axis == 0) {
    Tensor out({n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out.at(j) += A.at(i, j);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t j = 0; j < n; ++j) out.at(j) *= inv;
    return t.emit(std::move(out), {a}, [ai = a.id, m, n, inv](Tape& tp, std::uint32_t self) {
      const Tensor& G = tp.grad_acc(self);
      Tensor& dA = tp.grad_acc(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dA.at(i, j) += G.at(j) * inv;
    });
  }
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += A.at(i, j);
    out.at(i) = acc / static_cast<double>(n);
  }
  const double inv = 1.0 / static_cast<double>(n);
  return t.emit(std::move(out), {a}, [ai = a.id, m, n, inv](Tape& tp, std::uint32_t self) {
    const Tensor& G = tp.grad_acc(self);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dA.at(i, j) += G.at(i) * inv;
  });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A.at(i);
  return t.emit(Tensor::scalar(acc), {a}, [ai = a.id](Tape& tp, std::uint32_t self) {
    const double g = tp.grad_acc(self).at(0);
    Tensor& dA = tp.grad_acc(ai);
    for (std::size_t i = 0; i < dA.size(); ++i) dA.at(i) += g;
  });
}

}  // namespace mhqg::num

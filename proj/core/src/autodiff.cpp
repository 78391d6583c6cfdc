#include "taas/autodiff.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace taas {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

NodeRef Graph::push(Matrix value, bool needs_grad,
                    std::function<void(Graph&, NodeRef)> backprop) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<NodeRef>(nodes_.size() - 1);
}

void Graph::accumulate(NodeRef ref, const Matrix& g) {
  Node& n = nodes_[ref];
  if (!n.needs_grad) return;
  if (!n.grad.same_shape(g)) {
    throw std::logic_error("gradient shape mismatch at node " + std::to_string(ref) +
                           ": " + n.grad.shape_str() + " vs " + g.shape_str());
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad.data[i] += g.data[i];
}

NodeRef Graph::constant(Matrix m) { return push(std::move(m), false, nullptr); }

NodeRef Graph::param(Parameter& p) {
  auto it = param_cache_.find(&p);
  if (it != param_cache_.end()) return it->second;
  NodeRef ref = push(p.value, true, nullptr);
  nodes_[ref].leaf = &p;
  param_cache_[&p] = ref;
  return ref;
}

NodeRef Graph::add(NodeRef a, NodeRef b) {
  Matrix out = taas::add(nodes_[a].value, nodes_[b].value);
  bool ng = wants(a) || wants(b);
  return push(std::move(out), ng, [a, b](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    g.accumulate(a, up);
    g.accumulate(b, up);
  });
}

NodeRef Graph::sub(NodeRef a, NodeRef b) {
  Matrix out = taas::sub(nodes_[a].value, nodes_[b].value);
  bool ng = wants(a) || wants(b);
  return push(std::move(out), ng, [a, b](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    g.accumulate(a, up);
    g.accumulate(b, taas::scale(up, -1.0));
  });
}

NodeRef Graph::hadamard(NodeRef a, NodeRef b) {
  Matrix out = taas::hadamard(nodes_[a].value, nodes_[b].value);
  bool ng = wants(a) || wants(b);
  return push(std::move(out), ng, [a, b](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    if (g.wants(a)) g.accumulate(a, taas::hadamard(up, g.nodes_[b].value));
    if (g.wants(b)) g.accumulate(b, taas::hadamard(up, g.nodes_[a].value));
  });
}

NodeRef Graph::matmul(NodeRef a, NodeRef b) {
  Matrix out = taas::matmul(nodes_[a].value, nodes_[b].value);
  bool ng = wants(a) || wants(b);
  return push(std::move(out), ng, [a, b](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    if (g.wants(a)) g.accumulate(a, taas::matmul_nt(up, g.nodes_[b].value));
    if (g.wants(b)) g.accumulate(b, taas::matmul_tn(g.nodes_[a].value, up));
  });
}

NodeRef Graph::transpose(NodeRef a) {
  Matrix out = taas::transpose(nodes_[a].value);
  return push(std::move(out), wants(a), [a](Graph& g, NodeRef self) {
    g.accumulate(a, taas::transpose(g.nodes_[self].grad));
  });
}

NodeRef Graph::scale(NodeRef a, double c) {
  Matrix out = taas::scale(nodes_[a].value, c);
  return push(std::move(out), wants(a), [a, c](Graph& g, NodeRef self) {
    g.accumulate(a, taas::scale(g.nodes_[self].grad, c));
  });
}

NodeRef Graph::add_scalar(NodeRef a, double c) {
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v += c;
  return push(std::move(out), wants(a), [a](Graph& g, NodeRef self) {
    g.accumulate(a, g.nodes_[self].grad);
  });
}

NodeRef Graph::relu(NodeRef a) {
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), wants(a), [a](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    const Matrix& x = g.nodes_[a].value;
    Matrix dx(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx.data[i] = x.data[i] > 0.0 ? up.data[i] : 0.0;
    }
    g.accumulate(a, dx);
  });
}

NodeRef Graph::softplus(NodeRef a) {
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = stable_softplus(v);
  return push(std::move(out), wants(a), [a](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    const Matrix& x = g.nodes_[a].value;
    Matrix dx(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx.data[i] = up.data[i] * stable_sigmoid(x.data[i]);
    }
    g.accumulate(a, dx);
  });
}

NodeRef Graph::exp(NodeRef a) {
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = std::exp(v);
  return push(std::move(out), wants(a), [a](Graph& g, NodeRef self) {
    g.accumulate(a, taas::hadamard(g.nodes_[self].grad, g.nodes_[self].value));
  });
}

NodeRef Graph::log_eps(NodeRef a, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("log_eps: eps must be positive");
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = std::log(v + eps);
  return push(std::move(out), wants(a), [a, eps](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    const Matrix& x = g.nodes_[a].value;
    Matrix dx(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx.data[i] = up.data[i] / (x.data[i] + eps);
    }
    g.accumulate(a, dx);
  });
}

NodeRef Graph::softmax_rows(NodeRef a) {
  Matrix out = taas::softmax_rows(nodes_[a].value);
  return push(std::move(out), wants(a), [a](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    const Matrix& y = g.nodes_[self].value;
    Matrix dx(y.rows, y.cols);
    for (std::size_t i = 0; i < y.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) dot += up(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) {
        dx(i, j) = y(i, j) * (up(i, j) - dot);
      }
    }
    g.accumulate(a, dx);
  });
}

NodeRef Graph::layer_norm(NodeRef x, NodeRef gain, NodeRef bias, double eps) {
  const Matrix& xin = nodes_[x].value;
  const Matrix& gv = nodes_[gain].value;
  const Matrix& bv = nodes_[bias].value;
  if (gv.rows != 1 || bv.rows != 1 || gv.cols != xin.cols || bv.cols != xin.cols) {
    throw std::invalid_argument("layer_norm: gain/bias must be 1x" +
                                std::to_string(xin.cols));
  }
  const std::size_t R = xin.rows, C = xin.cols;
  // Normalized inputs and inverse stddevs are what the reverse pass needs,
  // so keep them alongside the output.
  auto xhat = std::make_shared<Matrix>(R, C);
  auto inv = std::make_shared<std::vector<double>>(R);
  Matrix out(R, C);
  for (std::size_t i = 0; i < R; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < C; ++j) mean += xin(i, j);
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      const double d = xin(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double iv = 1.0 / std::sqrt(var + eps);
    (*inv)[i] = iv;
    for (std::size_t j = 0; j < C; ++j) {
      const double xh = (xin(i, j) - mean) * iv;
      (*xhat)(i, j) = xh;
      out(i, j) = xh * gv.data[j] + bv.data[j];
    }
  }
  bool ng = wants(x) || wants(gain) || wants(bias);
  return push(std::move(out), ng,
              [x, gain, bias, xhat, inv](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    const std::size_t R = up.rows, C = up.cols;
    if (g.wants(bias)) {
      Matrix db(1, C);
      for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) db(0, j) += up(i, j);
      }
      g.accumulate(bias, db);
    }
    if (g.wants(gain)) {
      Matrix dg(1, C);
      for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) dg(0, j) += up(i, j) * (*xhat)(i, j);
      }
      g.accumulate(gain, dg);
    }
    if (g.wants(x)) {
      const Matrix& gv = g.nodes_[gain].value;
      Matrix dx(R, C);
      for (std::size_t i = 0; i < R; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < C; ++j) {
          const double dxh = up(i, j) * gv.data[j];
          m1 += dxh;
          m2 += dxh * (*xhat)(i, j);
        }
        m1 /= static_cast<double>(C);
        m2 /= static_cast<double>(C);
        for (std::size_t j = 0; j < C; ++j) {
          const double dxh = up(i, j) * gv.data[j];
          dx(i, j) = (*inv)[i] * (dxh - m1 - (*xhat)(i, j) * m2);
        }
      }
      g.accumulate(x, dx);
    }
  });
}

NodeRef Graph::add_row(NodeRef a, NodeRef row) {
  const Matrix& av = nodes_[a].value;
  const Matrix& rv = nodes_[row].value;
  if (rv.rows != 1 || rv.cols != av.cols) {
    throw std::invalid_argument("add_row: expected 1x" + std::to_string(av.cols) +
                                " row, got " + rv.shape_str());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < av.cols; ++j) out(i, j) += rv.data[j];
  }
  bool ng = wants(a) || wants(row);
  return push(std::move(out), ng, [a, row](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    g.accumulate(a, up);
    if (g.wants(row)) {
      Matrix dr(1, up.cols);
      for (std::size_t i = 0; i < up.rows; ++i) {
        for (std::size_t j = 0; j < up.cols; ++j) dr(0, j) += up(i, j);
      }
      g.accumulate(row, dr);
    }
  });
}

NodeRef Graph::concat_rows(NodeRef a, NodeRef b) {
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  if (av.cols != bv.cols) {
    throw std::invalid_argument("concat_rows: column mismatch " + av.shape_str() +
                                " vs " + bv.shape_str());
  }
  Matrix out(av.rows + bv.rows, av.cols);
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.size());
  bool ng = wants(a) || wants(b);
  const std::size_t split = av.rows;
  return push(std::move(out), ng, [a, b, split](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    if (g.wants(a)) {
      Matrix da(split, up.cols);
      std::copy(up.data.begin(), up.data.begin() + da.size(), da.data.begin());
      g.accumulate(a, da);
    }
    if (g.wants(b)) {
      Matrix db(up.rows - split, up.cols);
      std::copy(up.data.begin() + split * up.cols, up.data.end(), db.data.begin());
      g.accumulate(b, db);
    }
  });
}

NodeRef Graph::concat_cols(NodeRef a, NodeRef b) {
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  if (av.rows != bv.rows) {
    throw std::invalid_argument("concat_cols: row mismatch " + av.shape_str() +
                                " vs " + bv.shape_str());
  }
  Matrix out(av.rows, av.cols + bv.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < av.cols; ++j) out(i, j) = av(i, j);
    for (std::size_t j = 0; j < bv.cols; ++j) out(i, av.cols + j) = bv(i, j);
  }
  bool ng = wants(a) || wants(b);
  const std::size_t split = av.cols;
  return push(std::move(out), ng, [a, b, split](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    if (g.wants(a)) {
      Matrix da(up.rows, split);
      for (std::size_t i = 0; i < up.rows; ++i) {
        for (std::size_t j = 0; j < split; ++j) da(i, j) = up(i, j);
      }
      g.accumulate(a, da);
    }
    if (g.wants(b)) {
      Matrix db(up.rows, up.cols - split);
      for (std::size_t i = 0; i < up.rows; ++i) {
        for (std::size_t j = 0; j < db.cols; ++j) db(i, j) = up(i, split + j);
      }
      g.accumulate(b, db);
    }
  });
}

NodeRef Graph::rows_mean(NodeRef a) {
  const Matrix& av = nodes_[a].value;
  if (av.rows == 0) throw std::invalid_argument("rows_mean: empty input");
  Matrix out(1, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < av.cols; ++j) out(0, j) += av(i, j);
  }
  const double invr = 1.0 / static_cast<double>(av.rows);
  for (double& v : out.data) v *= invr;
  const std::size_t nrows = av.rows;
  return push(std::move(out), wants(a), [a, nrows, invr](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    Matrix da(nrows, up.cols);
    for (std::size_t i = 0; i < nrows; ++i) {
      for (std::size_t j = 0; j < up.cols; ++j) da(i, j) = up(0, j) * invr;
    }
    g.accumulate(a, da);
  });
}

NodeRef Graph::sum_all(NodeRef a) {
  const Matrix& av = nodes_[a].value;
  double s = 0.0;
  for (double v : av.data) s += v;
  Matrix out(1, 1);
  out.data[0] = s;
  return push(std::move(out), wants(a), [a](Graph& g, NodeRef self) {
    const double up = g.nodes_[self].grad.data[0];
    const Matrix& av = g.nodes_[a].value;
    g.accumulate(a, Matrix(av.rows, av.cols, up));
  });
}

NodeRef Graph::gather_rows(NodeRef table, std::vector<int> ids) {
  const Matrix& tv = nodes_[table].value;
  Matrix out(ids.size(), tv.cols);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= tv.rows) {
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                  " out of range for " + tv.shape_str());
    }
    for (std::size_t j = 0; j < tv.cols; ++j) out(t, j) = tv(id, j);
  }
  return push(std::move(out), wants(table),
              [table, ids = std::move(ids)](Graph& g, NodeRef self) {
    const Matrix& up = g.nodes_[self].grad;
    const Matrix& tv = g.nodes_[table].value;
    Matrix dt(tv.rows, tv.cols);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      const std::size_t id = static_cast<std::size_t>(ids[t]);
      for (std::size_t j = 0; j < tv.cols; ++j) dt(id, j) += up(t, j);
    }
    g.accumulate(table, dt);
  });
}

NodeRef Graph::gaussian_kl(NodeRef mu, NodeRef logvar) {
  const Matrix& mv = nodes_[mu].value;
  const Matrix& lv = nodes_[logvar].value;
  if (!mv.same_shape(lv)) {
    throw std::invalid_argument("gaussian_kl: shape mismatch " + mv.shape_str() +
                                " vs " + lv.shape_str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < mv.size(); ++i) {
    s += std::exp(lv.data[i]) + mv.data[i] * mv.data[i] - 1.0 - lv.data[i];
  }
  Matrix out(1, 1);
  out.data[0] = 0.5 * s;
  bool ng = wants(mu) || wants(logvar);
  return push(std::move(out), ng, [mu, logvar](Graph& g, NodeRef self) {
    const double up = g.nodes_[self].grad.data[0];
    const Matrix& mv = g.nodes_[mu].value;
    const Matrix& lv = g.nodes_[logvar].value;
    if (g.wants(mu)) {
      Matrix dm(mv.rows, mv.cols);
      for (std::size_t i = 0; i < mv.size(); ++i) dm.data[i] = up * mv.data[i];
      g.accumulate(mu, dm);
    }
    if (g.wants(logvar)) {
      Matrix dl(lv.rows, lv.cols);
      for (std::size_t i = 0; i < lv.size(); ++i) {
        dl.data[i] = up * 0.5 * (std::exp(lv.data[i]) - 1.0);
      }
      g.accumulate(logvar, dl);
    }
  });
}

NodeRef Graph::cross_entropy_sum(NodeRef logits, std::vector<int> targets,
                                 std::vector<double> row_mask) {
  const Matrix& lv = nodes_[logits].value;
  if (targets.size() != lv.rows || row_mask.size() != lv.rows) {
    throw std::invalid_argument("cross_entropy_sum: expected " + std::to_string(lv.rows) +
                                " targets and mask entries");
  }
  auto soft = std::make_shared<Matrix>(taas::softmax_rows(lv));
  double total = 0.0;
  for (std::size_t t = 0; t < lv.rows; ++t) {
    if (row_mask[t] == 0.0) continue;
    const int id = targets[t];
    if (id < 0 || static_cast<std::size_t>(id) >= lv.cols) {
      throw std::invalid_argument("cross_entropy_sum: target " + std::to_string(id) +
                                  " out of range for " + lv.shape_str());
    }
    total -= row_mask[t] * std::log((*soft)(t, static_cast<std::size_t>(id)));
  }
  Matrix out(1, 1);
  out.data[0] = total;
  return push(std::move(out), wants(logits),
              [logits, targets = std::move(targets), row_mask = std::move(row_mask),
               soft](Graph& g, NodeRef self) {
    const double up = g.nodes_[self].grad.data[0];
    Matrix dl(soft->rows, soft->cols);
    for (std::size_t t = 0; t < soft->rows; ++t) {
      if (row_mask[t] == 0.0) continue;
      const double w = up * row_mask[t];
      for (std::size_t j = 0; j < soft->cols; ++j) dl(t, j) = w * (*soft)(t, j);
      dl(t, static_cast<std::size_t>(targets[t])) -= w;
    }
    g.accumulate(logits, dl);
  });
}

void Graph::backward(NodeRef loss) {
  if (loss >= nodes_.size()) throw std::invalid_argument("backward: bad node ref");
  const Matrix& lv = nodes_[loss].value;
  if (lv.rows != 1 || lv.cols != 1) {
    throw std::invalid_argument("backward: loss must be 1x1, got " + lv.shape_str());
  }
  for (NodeRef i = 0; i <= loss; ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) n.grad = Matrix(n.value.rows, n.value.cols);
  }
  if (!nodes_[loss].needs_grad) return;  // loss does not depend on any parameter
  nodes_[loss].grad.data[0] = 1.0;
  for (NodeRef i = loss + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.backprop) n.backprop(*this, i);
  }
  for (NodeRef i = 0; i <= loss; ++i) {
    Node& n = nodes_[i];
    if (n.leaf && n.needs_grad) {
      for (std::size_t k = 0; k < n.grad.size(); ++k) {
        n.leaf->gradient.data[k] += n.grad.data[k];
      }
    }
  }
}

}  // namespace taas

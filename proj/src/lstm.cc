#include "drvot/lstm.h"

namespace drvot {

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

}  // namespace

void lstm_forward(const LstmParams& p, const Eigen::MatrixXd& input,
                  LstmTrace& trace) {
  const int T = static_cast<int>(input.rows());
  const int h = p.hidden();

  trace.gate_i.resize(T, h);
  trace.gate_f.resize(T, h);
  trace.gate_g.resize(T, h);
  trace.gate_o.resize(T, h);
  trace.cell.resize(T, h);
  trace.cell_tanh.resize(T, h);
  trace.hidden.resize(T, h);

  // Input contribution for the whole sequence in one product.
  Eigen::MatrixXd pre = input * p.w_input.transpose();  // T x 4h
  pre.rowwise() += p.bias.transpose();

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd a(4 * h);

  for (int t = 0; t < T; ++t) {
    a.noalias() = p.w_recur * h_prev;
    a += pre.row(t).transpose();

    const Eigen::ArrayXd i = sigmoid(a.segment(0, h).array());
    const Eigen::ArrayXd f = sigmoid(a.segment(h, h).array());
    const Eigen::ArrayXd g = a.segment(2 * h, h).array().tanh();
    const Eigen::ArrayXd o = sigmoid(a.segment(3 * h, h).array());

    const Eigen::ArrayXd c = f * c_prev.array() + i * g;
    const Eigen::ArrayXd tc = c.tanh();

    trace.gate_i.row(t) = i.transpose();
    trace.gate_f.row(t) = f.transpose();
    trace.gate_g.row(t) = g.transpose();
    trace.gate_o.row(t) = o.transpose();
    trace.cell.row(t) = c.transpose();
    trace.cell_tanh.row(t) = tc.transpose();
    trace.hidden.row(t) = (o * tc).transpose();

    h_prev = trace.hidden.row(t).transpose();
    c_prev = trace.cell.row(t).transpose();
  }
}

Eigen::MatrixXd lstm_backward(const LstmParams& p, const Eigen::MatrixXd& input,
                              const LstmTrace& trace,
                              const Eigen::MatrixXd& d_hidden,
                              LstmParams& grads) {
  const int T = static_cast<int>(input.rows());
  const int h = p.hidden();

  Eigen::MatrixXd d_pre(T, 4 * h);  // gradients w.r.t. pre-activations
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(h);

  for (int t = T - 1; t >= 0; --t) {
    dh += d_hidden.row(t).transpose();

    const Eigen::ArrayXd i = trace.gate_i.row(t).transpose().array();
    const Eigen::ArrayXd f = trace.gate_f.row(t).transpose().array();
    const Eigen::ArrayXd g = trace.gate_g.row(t).transpose().array();
    const Eigen::ArrayXd o = trace.gate_o.row(t).transpose().array();
    const Eigen::ArrayXd tc = trace.cell_tanh.row(t).transpose().array();

    const Eigen::ArrayXd d_o = dh.array() * tc;
    dc.array() += dh.array() * o * (1.0 - tc.square());

    const Eigen::ArrayXd c_prev =
        t > 0 ? Eigen::ArrayXd(trace.cell.row(t - 1).transpose().array())
              : Eigen::ArrayXd(Eigen::ArrayXd::Zero(h));

    const Eigen::ArrayXd d_i = dc.array() * g;
    const Eigen::ArrayXd d_f = dc.array() * c_prev;
    const Eigen::ArrayXd d_g = dc.array() * i;

    d_pre.row(t).segment(0, h) = (d_i * i * (1.0 - i)).transpose();
    d_pre.row(t).segment(h, h) = (d_f * f * (1.0 - f)).transpose();
    d_pre.row(t).segment(2 * h, h) = (d_g * (1.0 - g.square())).transpose();
    d_pre.row(t).segment(3 * h, h) = (d_o * o * (1.0 - o)).transpose();

    dc = (dc.array() * f).matrix();
    dh.noalias() = p.w_recur.transpose() * d_pre.row(t).transpose();
  }

  grads.w_input.noalias() += d_pre.transpose() * input;
  if (T > 1) {
    grads.w_recur.noalias() +=
        d_pre.bottomRows(T - 1).transpose() * trace.hidden.topRows(T - 1);
  }
  grads.bias += d_pre.colwise().sum().transpose();

  return d_pre * p.w_input;  // T x in
}

void bilstm_forward(const BiLstmLayer& layer, const Eigen::MatrixXd& input,
                    BiLstmTrace& trace) {
  const int h = layer.fwd.hidden();
  lstm_forward(layer.fwd, input, trace.fwd);
  lstm_forward(layer.bwd, input.colwise().reverse(), trace.bwd);
  trace.output.resize(input.rows(), 2 * h);
  trace.output.leftCols(h) = trace.fwd.hidden;
  trace.output.rightCols(h) = trace.bwd.hidden.colwise().reverse();
}

Eigen::MatrixXd bilstm_backward(const BiLstmLayer& layer,
                                const Eigen::MatrixXd& input,
                                const BiLstmTrace& trace,
                                const Eigen::MatrixXd& d_output,
                                BiLstmLayer& grads) {
  const int h = layer.fwd.hidden();
  Eigen::MatrixXd d_input =
      lstm_backward(layer.fwd, input, trace.fwd, d_output.leftCols(h), grads.fwd);
  const Eigen::MatrixXd reversed_input = input.colwise().reverse();
  const Eigen::MatrixXd d_bwd =
      d_output.rightCols(h).colwise().reverse();
  d_input += lstm_backward(layer.bwd, reversed_input, trace.bwd, d_bwd, grads.bwd)
                 .colwise()
                 .reverse();
  return d_input;
}

}  // namespace drvot

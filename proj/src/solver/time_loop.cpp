#include "itercomm/solver/time_loop.hpp"

#include <algorithm>
#include <chrono>

#include "itercomm/solver/block.hpp"

namespace itercomm::solver {

RankRun time_step_loop(transport::Endpoint& ep, const Partition3D& part, const DiscreteSystem& sys,
                       const SolverOptions& opt) {
  const Rank r = ep.rank();
  LocalBlock blk(part, r);
  const std::size_t cells = blk.cells();

  comm::Communicator comm(ep);
  comm.init_graph(blk.peers(), blk.peers());
  comm.init_buffers(blk.link_sizes(), blk.link_sizes());
  comm.init_residual(cells, opt.norm);
  bool local_conv = false;
  comm.config_async(cells, local_conv);
  if (opt.scheme == comm::Scheme::async)
    comm.switch_async(opt.max_recv_requests);
  else
    comm.set_sync_scheme(opt.scheme);
  comm.set_observer(opt.observer);

  std::vector<double> rhs(cells, 0.0), scratch(cells, 0.0);
  int step = 0;
  std::size_t k = 0;

  auto compute = [&] {
    SweepArgs a;
    a.ext = blk.extents();
    a.u_old = comm.solution().data();
    a.rhs = rhs.data();
    for (const auto& f : blk.faces()) a.halo[f.face] = comm.recv_buf(f.link).data();
    a.stencil = sys.stencil;
    a.form = opt.residual_form;
    a.u_new = scratch.data();
    a.residual = comm.residual().data();
    jacobi_sweep(opt.kernel, a);
    auto sol = comm.solution();
    std::copy(scratch.begin(), scratch.end(), sol.begin());
    for (const auto& f : blk.faces()) blk.pack(f.face, sol, comm.send_buf(f.link));
    local_conv = convergence::local_norm(comm.residual(), opt.norm) < opt.norm.threshold;
    ep.compute(opt.cost_per_cell * static_cast<double>(cells));
    ++k;
    if (opt.on_iterate) opt.on_iterate(r, step, k, sol);
  };

  RankRun run;
  run.rank = r;
  run.box = blk.box();
  for (step = 1; step <= sys.spec.time_steps; ++step) {
    auto sol = comm.solution();
    for (std::size_t i = 0; i < cells; ++i) rhs[i] = sys.rhs(sol[i]);
    comm.begin_solve();
    k = 0;
    const std::uint64_t rounds_before = comm.detector() ? comm.detector()->stats().rounds_evaluated : 0;
    const double t0 = ep.now();
    const auto w0 = std::chrono::steady_clock::now();
    auto res = comm::run_scheme(comm, compute, opt.max_iterations);

    StepRecord rec;
    rec.step = step;
    rec.iterations = res.iterations;
    rec.converged = res.converged;
    rec.residual_norm = comm.residual_norm();
    rec.loop_time = ep.now() - t0;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
    rec.snapshots = comm.detector() ? comm.detector()->stats().rounds_evaluated - rounds_before : 0;
    rec.solution.assign(comm.solution().begin(), comm.solution().end());
    run.steps.push_back(std::move(rec));
    if (!res.converged) break;
  }
  run.comm = comm.stats();
  if (comm.detector()) run.detector = comm.detector()->stats();
  return run;
}

}  // namespace itercomm::solver

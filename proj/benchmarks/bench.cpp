// Microbenchmarks for the hot paths: batched field evaluation, the combined
// loss with parameter gradients, max-cut optimization, and marching cubes.

#include <benchmark/benchmark.h>

#include "dualms/field.hpp"
#include "dualms/graph.hpp"
#include "dualms/io.hpp"
#include "dualms/maxcut.hpp"
#include "dualms/mesh.hpp"
#include "dualms/rng.hpp"

namespace {

using namespace dualms;

DesignDomain unit_cube_domain() {
  std::vector<Port> ports = {
      {{0.0, 0.25, 0.5}, Fluid::A, PortKind::Inlet},
      {{1.0, 0.25, 0.5}, Fluid::A, PortKind::Outlet},
      {{0.0, 0.75, 0.5}, Fluid::B, PortKind::Inlet},
      {{1.0, 0.75, 0.5}, Fluid::B, PortKind::Outlet},
  };
  FlowField flow;
  flow.kind = FlowField::Kind::Constant;
  flow.direction = Vec3::UnitX();
  return DesignDomain::from_csg(Csg::box(Vec3::Zero(), Vec3::Ones()), std::move(ports),
                                std::move(flow));
}

void bm_evaluate_batch(benchmark::State& state) {
  ModelConfig mc;
  mc.num_frequencies = static_cast<int>(state.range(0));
  mc.width = static_cast<int>(state.range(1));
  Aabb box{Vec3::Zero(), Vec3::Ones()};
  FieldModel model = make_model<float>(mc, box, 1);

  Rng rng(2, 1);
  std::vector<Vec3> pts(4096);
  for (Vec3& p : pts) p = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
  std::vector<double> out(pts.size());

  for (auto _ : state) {
    evaluate_batch(model, pts, std::span<double>(out));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(bm_evaluate_batch)->Args({64, 64})->Args({128, 128})->Args({1024, 256});

void bm_loss_and_grads(benchmark::State& state) {
  ModelConfig mc;
  mc.num_frequencies = static_cast<int>(state.range(0));
  mc.width = static_cast<int>(state.range(1));
  Aabb box{Vec3::Zero(), Vec3::Ones()};
  FieldModel model = make_model<float>(mc, box, 1);

  Rng rng(3, 1);
  auto draw = [&](std::size_t n) {
    std::vector<Vec3> pts(n);
    for (Vec3& p : pts) p = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    return pts;
  };
  std::vector<Vec3> a = draw(1024), b = draw(1024), omega = draw(4096);
  ParamGrads<float> grads = ParamGrads<float>::zeros_like(model);

  for (auto _ : state) {
    LossValues losses = total_loss_and_grads<float>(model, a, b, omega, 5000.0, 1.0, &grads);
    benchmark::DoNotOptimize(losses);
  }
}
BENCHMARK(bm_loss_and_grads)->Args({64, 64})->Args({128, 128});

void bm_maxcut_optimize(benchmark::State& state) {
  DesignDomain domain = unit_cube_domain();
  GraphBuildOptions opt;
  opt.vertex_count = static_cast<int>(state.range(0));
  opt.cvt_iterations = 5;
  opt.cvt_density_samples = 10000;
  SpatialGraph graph = build_graph(domain, opt, 11);

  for (auto _ : state) {
    Partition part = initial_partition(graph, 11);
    auto [best, trace] = optimize(graph, std::move(part), 100000);
    benchmark::DoNotOptimize(trace);
  }
}
BENCHMARK(bm_maxcut_optimize)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void bm_marching_cubes(benchmark::State& state) {
  ScalarFn f = tpms_field(TpmsKind::Gyroid, 2);
  Aabb box{Vec3::Zero(), Vec3::Ones()};
  ScalarGrid grid = sample_grid(f, box, static_cast<int>(state.range(0)));

  for (auto _ : state) {
    TriangleMesh mesh = marching_cubes(grid, 0.0);
    benchmark::DoNotOptimize(mesh);
  }
}
BENCHMARK(bm_marching_cubes)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

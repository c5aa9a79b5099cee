#!/usr/bin/env python3
"""
LNC Planner - Link activation scheduling for sensor networks
Main orchestration script

Usage:
    python main.py gen --n 20 --r 6 -o net.json              # Generate a random network
    python main.py plan --network net.json --mode central    # Optimal centralized schedule
    python main.py plan --network net.json --mode hlnc       # Hierarchical schedule
    python main.py simulate --network net.json --schedule s.json
    python main.py check --network net.json --schedule s.json
    python main.py oracle --network net.json                 # Brute-force ground truth
    python main.py bench -o bench.csv                        # Complexity sweep
"""

import argparse
import json
import logging
import os
import sys
import time
from typing import Any, Dict, List, Optional

import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

from modules.consensus import (check_joint_connectivity, compare_runs, efficiency, initial_state, liveness_check,
                               run)
from modules.errors import (BudgetExceededError, ConfigError, CoverageError, InfeasibleError, LncError,
                            NetworkError, PlanningError, TranslationBudgetError)
from modules.hlnc import audit_feasibility, plan_hlnc, plan_hlnc_k_hop
from modules.logging_setup import setup_logging
from modules.network import (build_geometric_graph, connected_components, corridor_instance, coverage_check,
                             kmeans_place, load_positions_csv, local_subgraph, network_from_dict, network_to_dict,
                             path_network, random_geometric_network, save_positions_csv)
from modules.oracle import brute_force_optimal_with_cost
from modules.planner import PlannerOptions, plan_centralized_outcome, plan_specialized_outcome
from modules.schemas import (NetworkFile, PlanMode, PlanReportFile, RunConfig, ScheduleFile, SimulationSummary,
                             load_run_config)
from modules.ts import CostFn, CostKind, Schedule, TsPolicy, decode_element, plan_cost, sequential_schedule

# Load environment variables
load_dotenv()

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_BUDGET = 4
EXIT_INTERRUPTED = 130


class AuditFailed(LncError):
    """Produced schedule or checked schedule failed the feasibility audit"""
    pass


class LncPlanner:
    """Main application orchestrator"""

    def __init__(self, config: RunConfig, log_level: Optional[str] = None):
        """
        Initialize the planner application

        Args:
            config: resolved run configuration
            log_level: overrides config.logging.level
        """
        self.config = config
        self._setup_logging(log_level)
        self.logger = logging.getLogger(__name__)
        self.logger.debug(f"Resolved config: {self.config_echo()}")

    def _setup_logging(self, log_level: Optional[str]):
        """Configure console and file handlers"""
        log_config = self.config.logging
        level = log_level or os.getenv('LNC_LOG_LEVEL') or log_config.level
        setup_logging(level, log_config.directory, log_config.file_enabled)

    def config_echo(self) -> Dict[str, Any]:
        return self.config.model_dump(mode='json')

    # ========================================
    # FILE HELPERS
    # ========================================

    def _write_json(self, path: str, payload: Dict[str, Any]):
        payload = dict(payload)
        payload['config'] = self.config_echo()
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(payload, f, indent=2)
        self.logger.info(f"Wrote {path}")

    def _write_csv(self, path: str, df: pd.DataFrame):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as f:
            f.write(f"# config: {json.dumps(self.config_echo(), sort_keys=True)}\n")
            df.to_csv(f, index=False)
        self.logger.info(f"Wrote {path} ({len(df)} rows)")

    def load_network(self, path: str):
        if not os.path.exists(path):
            raise ConfigError(f"Network file not found: {path}")
        with open(path, 'r') as f:
            data = json.load(f)
        model = NetworkFile(**data)
        return network_from_dict(model.model_dump())

    def load_schedule(self, path: str) -> Schedule:
        if not os.path.exists(path):
            raise ConfigError(f"Schedule file not found: {path}")
        with open(path, 'r') as f:
            data = json.load(f)
        data = data.get('schedule', data)
        model = ScheduleFile(**{k: data[k] for k in ('prefix', 'suffix', 'cost') if k in data})
        return Schedule.from_dict(model.model_dump())

    def cost_function(self, net, table_path: Optional[str] = None) -> CostFn:
        kind = CostKind(self.config.planner.cost)
        if kind == CostKind.TABLE:
            if not table_path:
                raise ConfigError("Cost kind 'table' needs --cost-table")
            with open(table_path, 'r') as f:
                rows = json.load(f)
            table = {
                (decode_element(row['from']), decode_element(row['to'])): float(row['cost'])
                for row in rows.get('entries', [])
            }
            return CostFn.from_table(table, float(rows.get('default', 1.0)))
        return CostFn.for_network(net, kind)

    def planner_options(self) -> PlannerOptions:
        p = self.config.planner
        return PlannerOptions(
            policy=TsPolicy(p.policy),
            liveness_only=p.liveness_only,
            fairness=p.fairness,
            pba_budget=p.pba_budget,
            nba_budget=p.nba_budget,
        )

    # ========================================
    # SUBCOMMANDS
    # ========================================

    def cmd_gen(self, output: str, csv_path: Optional[str] = None, csv_out: Optional[str] = None,
                with_centers: bool = False):
        """Generate (or ingest) a network and write its JSON"""
        self.logger.info("=" * 60)
        self.logger.info("Generating sensor network")
        self.logger.info("=" * 60)
        cfg = self.config.network
        if csv_path:
            ids, X = load_positions_csv(csv_path)
            if len({tuple(p) for p in X.tolist()}) != len(X):
                raise NetworkError(f"Duplicate sensor positions in {csv_path}")
            net = build_geometric_graph(X, cfg.r, ids=ids)
        else:
            net = random_geometric_network(cfg.n, cfg.r, tuple(cfg.box), cfg.seed,
                                           require_connected=cfg.require_connected, max_tries=cfg.max_tries)
        centers, R = None, None
        if with_centers:
            centers = kmeans_place(net.positions, min(self.config.command.K, net.n), self.config.command.seed)
            R = self.config.command.R
            if R <= net.r:
                raise ConfigError(f"Command radius R={R} must exceed communication radius r={net.r}")
        self.logger.info(f"Network: {net.n} sensors, {len(net.edges)} links at r={net.r}")
        self._write_json(output, network_to_dict(net, centers, R))
        if csv_out:
            save_positions_csv(net, csv_out)
        return net

    def _hierarchical(self, net, centers, R, cost, options):
        cmd = self.config.command
        if cmd.k_hop is not None:
            return plan_hlnc_k_hop(net, cmd.k_hop, cost=cost, options=options, max_period=cmd.max_period)
        K = len(centers) if centers is not None else min(cmd.K, net.n)
        R = cmd.R if R is None else R
        if R <= net.r:
            raise ConfigError(f"Hierarchical planning needs r < R (network r={net.r}, R={R})")
        while True:
            if centers is None or len(centers) != K:
                centers = kmeans_place(net.positions, K, cmd.seed)
            if coverage_check(net, centers, R) is not None or not cmd.escalate_k or K >= net.n:
                return plan_hlnc(net, centers, R, cost, options, max_period=cmd.max_period)
            self.logger.warning(f"Coverage fails with K={K}, R={R}; escalating to K={K + 1}")
            K += 1

    def cmd_plan(self, network: str, output: str, report_path: Optional[str] = None,
                 cost_table: Optional[str] = None):
        """Plan with the configured mode, audit, then write the schedule"""
        mode = PlanMode(self.config.planner.mode)
        self.logger.info("=" * 60)
        self.logger.info(f"Planning ({mode.value})")
        self.logger.info("=" * 60)
        net, centers, R = self.load_network(network)
        cost = self.cost_function(net, cost_table)
        options = self.planner_options()

        report: Dict[str, Any]
        if mode == PlanMode.CENTRAL:
            outcome = plan_centralized_outcome(net, cost, options)
            schedule, report = outcome.schedule, outcome.report.to_dict()
        elif mode == PlanMode.SPECIALIZED:
            outcome = plan_specialized_outcome(net, cost, options.pba_budget)
            schedule, report = outcome.schedule, outcome.report.to_dict()
        else:
            plan = self._hierarchical(net, centers, R, cost, options)
            schedule = plan.stitched
            report = plan.to_dict(plan_cost(schedule, cost))
            report['K'] = plan.layer.K
            report['e_max'] = plan.layer.e_max()

        audit = audit_feasibility(net, schedule, fairness=options.fairness and mode == PlanMode.CENTRAL)
        if not audit.ok:
            raise AuditFailed(f"Refusing to write infeasible schedule: {audit.summary()}")
        value = plan_cost(schedule, cost)
        report.update(mode=mode.value, cost=value, efficiency_pct=efficiency(schedule, net))
        plan_report = PlanReportFile(**report)
        self.logger.info(f"Schedule cost {value:.4f}, efficiency {plan_report.efficiency_pct:.2f}%")
        self._write_json(output, schedule.to_dict(value))
        if report_path:
            self._write_json(report_path, plan_report.model_dump(mode='json', exclude_none=True))
        return schedule

    def cmd_simulate(self, network: str, schedule_path: str, output: str, summary_path: Optional[str] = None):
        """Consensus run along a schedule, optionally paired with the sequential schedule"""
        self.logger.info("=" * 60)
        self.logger.info("Consensus simulation")
        self.logger.info("=" * 60)
        cfg = self.config.consensus
        net, centers, R = self.load_network(network)
        schedule = self.load_schedule(schedule_path)
        y0 = initial_state(net.n, cfg.seed_mode, cfg.seed)
        trajectory = run(net, schedule, y0, cfg.epsilon, cfg.T, allow_infeasible=cfg.allow_infeasible)
        self._write_csv(output, trajectory.to_frame())

        summary = trajectory.summary(efficiency(schedule, net))
        if cfg.window:
            summary['joint_connectivity'] = check_joint_connectivity(net, schedule, cfg.window)
        if cfg.paired:
            if centers is not None and R is not None:
                groups = {j: list(local_subgraph(net, c, R).nodes()) for j, c in enumerate(centers)}
            else:
                groups = {k: c for k, c in enumerate(connected_components(net.graph))}
            baseline = sequential_schedule(net)
            paired = compare_runs(net, {'plan': schedule, 'seq': baseline}, y0, groups, cfg.epsilon, cfg.T)
            root, _ = os.path.splitext(output)
            self._write_csv(f"{root}_paired.csv", paired)
            seq = run(net, baseline, y0, cfg.epsilon, cfg.T)
            summary['sequential'] = seq.summary(efficiency(baseline, net))
        result = SimulationSummary(**summary)
        self.logger.info(f"Final spread {result.final_spread:.3e}, clusters {result.clusters}")
        if summary_path:
            self._write_json(summary_path, result.model_dump(mode='json', exclude_none=True))
        return result

    def cmd_check(self, network: str, schedule_path: str, output: Optional[str] = None,
                  window: Optional[int] = None):
        """Audit a (network, schedule) pair"""
        net, _, _ = self.load_network(network)
        schedule = self.load_schedule(schedule_path)
        audit = audit_feasibility(net, schedule)
        window = window or self.config.consensus.window or schedule.period
        report = {
            'audit': audit.to_dict(),
            'liveness': liveness_check(net, schedule),
            'liveness_ltl': liveness_check(net, schedule, method='ltl'),
            'joint_connectivity': check_joint_connectivity(net, schedule, window),
            'window': window,
            'efficiency_pct': efficiency(schedule, net),
        }
        self.logger.info(f"Audit: {audit.summary()}")
        if output:
            self._write_json(output, report)
        if not audit.ok:
            raise AuditFailed(audit.summary())
        return report

    def cmd_oracle(self, network: str, output: str):
        """Brute-force optimal schedule for a tiny network"""
        cfg = self.config.oracle
        net, _, _ = self.load_network(network)
        cost = self.cost_function(net)
        schedule, value = brute_force_optimal_with_cost(net, cost, cfg.P, cfg.S, cfg.max_edges)
        if schedule is None:
            raise InfeasibleError(f"No satisfying lasso within P={cfg.P}, S={cfg.S}")
        self.logger.info(f"Oracle optimum {value:.4f}")
        self._write_json(output, schedule.to_dict(value))
        return schedule

    def cmd_bench(self, output: str):
        """Centralized (full phi) vs hierarchical wallclock sweep"""
        self.logger.info("=" * 60)
        self.logger.info("Benchmark")
        self.logger.info("=" * 60)
        cfg = self.config.bench
        rows: List[Dict[str, Any]] = []
        for m in cfg.edges:
            net = path_network(m)
            options = PlannerOptions.faithful(pba_budget=cfg.budget) if cfg.full_phi \
                else PlannerOptions(pba_budget=cfg.budget)
            started = time.perf_counter()
            try:
                outcome = plan_centralized_outcome(net, CostFn.jaccard(), options)
                rows.append({'planner': 'centralized', 'edges': m, 'K': 1, 'e_max': m,
                             'pba_states': outcome.report.pba_states, 'cost': outcome.report.cost,
                             'wallclock_ms': outcome.report.wallclock_ms, 'status': 'ok'})
            except (BudgetExceededError, TranslationBudgetError) as e:
                self.logger.info(f"Centralized |E|={m}: DNF ({e})")
                rows.append({'planner': 'centralized', 'edges': m, 'K': 1, 'e_max': m, 'pba_states': None,
                             'cost': None, 'wallclock_ms': (time.perf_counter() - started) * 1000.0,
                             'status': 'DNF'})
        for K in cfg.K_values:
            net, centers, R = corridor_instance(K)
            plan = plan_hlnc(net, centers, R)
            pba_states = sum(r.pba_states for r in plan.local_reports.values())
            rows.append({'planner': 'hlnc', 'edges': len(net.edges), 'K': K, 'e_max': plan.layer.e_max(),
                         'pba_states': pba_states, 'cost': plan_cost(plan.stitched, CostFn.jaccard()),
                         'wallclock_ms': plan.timings_ms['total'], 'status': 'ok'})
        df = pd.DataFrame(rows)
        self._write_csv(output, df)
        return df


# ========================================
# CLI
# ========================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='LNC Planner - Locally non-interfering link scheduling',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py gen --n 20 --r 6 --seed 3 -o net.json        Random geometric network
  python main.py gen --csv sensors.csv --r 6 -o net.json      Ingest id,x,y positions
  python main.py plan --network net.json --mode specialized -o s.json
  python main.py plan --network net.json --mode hlnc --K 10 --R 8 --escalate-k -o s.json
  python main.py simulate --network net.json --schedule s.json --paired -o traj.csv
  python main.py check --network net.json --schedule s.json -o check.json
  python main.py oracle --network tiny.json -o truth.json
  python main.py bench -o bench.csv
        """
    )
    parser.add_argument('--config', default=None, help='Path to config file (default: config.json if present)')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR')
    sub = parser.add_subparsers(dest='command')

    gen = sub.add_parser('gen', help='Generate or ingest a network')
    gen.add_argument('--n', type=int)
    gen.add_argument('--r', type=float)
    gen.add_argument('--seed', type=int)
    gen.add_argument('--box', type=float, nargs=2, metavar=('W', 'H'))
    gen.add_argument('--csv', help='id,x,y positions to ingest')
    gen.add_argument('--csv-out', help='Also write positions as CSV')
    gen.add_argument('--centers', action='store_true', help='Embed k-means command centers')
    gen.add_argument('--K', type=int)
    gen.add_argument('--R', type=float)
    gen.add_argument('-o', '--output', required=True)

    plan = sub.add_parser('plan', help='Synthesize a schedule')
    plan.add_argument('--network', required=True)
    plan.add_argument('--mode', choices=[m.value for m in PlanMode])
    plan.add_argument('--cost', choices=[c.value for c in CostKind])
    plan.add_argument('--cost-table', help='JSON table for --cost table')
    plan.add_argument('--policy', choices=[p.value for p in TsPolicy])
    plan.add_argument('--full-phi', action='store_true', help='Build the automaton from the full formula')
    plan.add_argument('--fairness', action='store_true')
    plan.add_argument('--pba-budget', type=int)
    plan.add_argument('--K', type=int)
    plan.add_argument('--R', type=float)
    plan.add_argument('--k-hop', type=int)
    plan.add_argument('--escalate-k', action='store_true')
    plan.add_argument('--report', help='Planning report JSON')
    plan.add_argument('-o', '--output', required=True)

    sim = sub.add_parser('simulate', help='Consensus simulation along a schedule')
    sim.add_argument('--network', required=True)
    sim.add_argument('--schedule', required=True)
    sim.add_argument('--epsilon', type=float)
    sim.add_argument('--T', type=int)
    sim.add_argument('--seed-mode', choices=['basis', 'random'])
    sim.add_argument('--seed', type=int)
    sim.add_argument('--window', type=int)
    sim.add_argument('--paired', action='store_true')
    sim.add_argument('--allow-infeasible', action='store_true')
    sim.add_argument('--summary', help='Summary JSON')
    sim.add_argument('-o', '--output', required=True)

    check = sub.add_parser('check', help='Audit a schedule')
    check.add_argument('--network', required=True)
    check.add_argument('--schedule', required=True)
    check.add_argument('--window', type=int)
    check.add_argument('-o', '--output')

    oracle = sub.add_parser('oracle', help='Brute-force optimum for tiny networks')
    oracle.add_argument('--network', required=True)
    oracle.add_argument('--P', type=int)
    oracle.add_argument('--S', type=int)
    oracle.add_argument('-o', '--output', required=True)

    bench = sub.add_parser('bench', help='Complexity sweep')
    bench.add_argument('--edges', type=int, nargs='+')
    bench.add_argument('--K-values', type=int, nargs='+')
    bench.add_argument('--budget', type=int)
    bench.add_argument('-o', '--output', required=True)
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested config overrides for every flag that was given"""
    get = lambda name: getattr(args, name, None)
    flags = lambda name: True if get(name) else None
    return {
        'network': {'n': get('n'), 'r': get('r'), 'seed': get('seed') if args.command == 'gen' else None,
                    'box': get('box')},
        'command': {'K': get('K'), 'R': get('R'), 'k_hop': get('k_hop'), 'escalate_k': flags('escalate_k')},
        'planner': {'mode': get('mode'), 'cost': get('cost'), 'policy': get('policy'),
                    'liveness_only': False if get('full_phi') else None, 'fairness': flags('fairness'),
                    'pba_budget': get('pba_budget')},
        'consensus': {'epsilon': get('epsilon'), 'T': get('T'), 'seed_mode': get('seed_mode'),
                      'seed': get('seed') if args.command == 'simulate' else None, 'window': get('window'),
                      'paired': flags('paired'), 'allow_infeasible': flags('allow_infeasible')},
        'oracle': {'P': get('P'), 'S': get('S')},
        'bench': {'edges': get('edges'), 'K_values': get('K_values'), 'budget': get('budget')},
    }


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    try:
        config_path = args.config or ('config.json' if os.path.exists('config.json') else None)
        config = load_run_config(config_path, overrides_from_args(args))
        app = LncPlanner(config, args.log_level)
    except (ConfigError, ValidationError, ValueError) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    logger = logging.getLogger(__name__)
    try:
        if args.command == 'gen':
            app.cmd_gen(args.output, args.csv, args.csv_out, args.centers)
        elif args.command == 'plan':
            app.cmd_plan(args.network, args.output, args.report, args.cost_table)
        elif args.command == 'simulate':
            app.cmd_simulate(args.network, args.schedule, args.output, args.summary)
        elif args.command == 'check':
            app.cmd_check(args.network, args.schedule, args.output, args.window)
        elif args.command == 'oracle':
            app.cmd_oracle(args.network, args.output)
        elif args.command == 'bench':
            app.cmd_bench(args.output)
        return EXIT_OK

    except KeyboardInterrupt:
        print("\n\nOperation cancelled by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (ConfigError, ValidationError) as e:
        logger.debug("Configuration failure", exc_info=True)
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (InfeasibleError, CoverageError, PlanningError, AuditFailed) as e:
        logger.debug("Infeasible result", exc_info=True)
        logger.error(str(e))
        return EXIT_INFEASIBLE
    except (BudgetExceededError, TranslationBudgetError) as e:
        logger.debug("Budget exceeded", exc_info=True)
        logger.error(str(e))
        return EXIT_BUDGET
    except LncError as e:
        logger.debug("Planner error", exc_info=True)
        logger.error(str(e))
        return EXIT_ERROR


def main():
    """Main CLI entry point"""
    sys.exit(run_cli())


if __name__ == '__main__':
    main()

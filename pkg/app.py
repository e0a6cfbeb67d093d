# app.py
"""
Command-line entry point: python app.py <command> [options]

Commands: simulate, nscore, fit, qq, kl-table, automobile-demo.
Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""
import argparse
import dataclasses
import json
import logging
import sys

import pandas as pd

import config
from exceptions import ConfigError, NumericalError, OrdcopError, SelectionError, ValidationError
from models import RunConfig
from services import (
    automobile_service, diagnose_service, fit_service, kl_service, latent_service, report_service, sample_service
)
from services.copulas import default_ladder
from services.model_registry import get_model, model_from_dict

logger = logging.getLogger(__name__)


# ===== Argument parsing =====

def build_parser():
    parser = argparse.ArgumentParser(prog='ordcop', description='Copula models for ordinal/continuous pairs')
    sub = parser.add_subparsers(dest='command', required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--config', help='JSON file with option values (flags win)')
        p.add_argument('--log-level', dest='log_level', help='DEBUG, INFO, WARNING or ERROR')
        p.add_argument('--seed', type=int)
        p.add_argument('--output')
        p.add_argument('--emit', choices=('csv', 'json', 'svg'))
        return p

    def data_options(p):
        p.add_argument('--input')
        p.add_argument('--x-col', dest='x_col')
        p.add_argument('--y-col', dest='y_col')
        p.add_argument('--merge', action='append', metavar='FROM=TO')
        p.add_argument('--order', help='comma-separated category labels, lowest first')

    p = command('simulate', 'draw a sample from a benchmark model')
    p.add_argument('--model')
    p.add_argument('--n', type=int)

    p = command('nscore', 'latent normal scores of the ordinal variable')
    data_options(p)

    p = command('fit', 'maximum likelihood fits ranked by AIC or BIC')
    data_options(p)
    p.add_argument('--family', action='append')
    p.add_argument('--criterion', choices=('aic', 'bic'))
    p.add_argument('--beta', action='store_true', default=None)
    p.add_argument('--beta-seeds', dest='beta_seeds', type=int)
    p.add_argument('--summary', action='store_true', default=None)
    p.add_argument('--jobs', type=int)

    p = command('qq', 'conditional Q-Q panels per category')
    data_options(p)
    p.add_argument('--family', action='append')
    p.add_argument('--criterion', choices=('aic', 'bic'))
    p.add_argument('--beta', action='store_true', default=None)
    p.add_argument('--beta-seeds', dest='beta_seeds', type=int)

    p = command('kl-table', 'KL ladder search on the benchmark models')
    p.add_argument('--which', choices=('two', 'three', 'all'))
    p.add_argument('--strict', action='store_true', default=None)
    p.add_argument('--mode', choices=('exhaustive', 'staged'))
    p.add_argument('--jobs', type=int)

    p = command('automobile-demo', 'Auto MPG data example')
    p.add_argument('--input')
    p.add_argument('--family', action='append')
    p.add_argument('--criterion', choices=('aic', 'bic'))
    return parser


def _split(values):
    """Repeated and comma-separated flag values as one tuple"""
    if values is None:
        return None
    if isinstance(values, str):
        values = [values]
    return tuple(v.strip() for value in values for v in str(value).split(',') if v.strip())


def _parse_merge(values):
    if values is None or isinstance(values, dict):
        return values
    merges = {}
    for item in values:
        if '=' not in item:
            raise ConfigError(f"--merge expects FROM=TO, got {item!r}")
        source, target = item.split('=', 1)
        merges[source.strip()] = target.strip()
    return merges


def load_run_config(args):
    """Flags override the --config file, which overrides built-in defaults"""
    file_values = {}
    if getattr(args, 'config', None):
        try:
            with open(args.config, encoding='utf-8') as f:
                file_values = {k.replace('-', '_'): v for k, v in json.load(f).items()}
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config file {args.config}: {str(e)}")

    values = {}
    for f in dataclasses.fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
        elif f.name in file_values:
            values[f.name] = file_values[f.name]
    values['command'] = args.command
    if 'merge' in values:
        values['merge'] = _parse_merge(values['merge'])
    for name in ('order', 'family'):
        if name in values:
            values[name] = _split(values[name])
    return RunConfig(**values).validate(), file_values


# ===== Shared steps =====

def _load_sample(cfg):
    x_raw, y_raw = report_service.read_pairs(cfg.input, cfg.x_col, cfg.y_col)
    sample = sample_service.build_sample(x_raw, y_raw, merges=cfg.merge, order=cfg.order)
    sample, flipped_x, _ = sample_service.orient_positive(sample)
    if flipped_x:
        print(f"Category order reversed to give positive dependence: {list(sample.labels)}")
    return sample, sample_service.pseudo_observations(sample)


def _families(cfg):
    return list(cfg.family) if cfg.family else [f.name for f in default_ladder()]


# ===== Commands =====

def cmd_simulate(cfg):
    model = model_from_dict(cfg.model) if isinstance(cfg.model, dict) else get_model(cfg.model)
    sample = kl_service.sample_from_model(model, cfg.n, cfg.seed)
    report_service.write_pairs(sample, cfg.output)
    meta = {
        'model': cfg.model if isinstance(cfg.model, str) else None,
        'spec': model.to_dict(),
        'n': sample.n,
        'seed': cfg.seed,
        'counts': sample.counts.tolist(),
    }
    report_service.write_json(meta, report_service.sibling(cfg.output, '.meta', '.json'))
    print(f"Wrote {sample.n} rows to {cfg.output} (counts {sample.counts.tolist()}, seed {cfg.seed})")
    return 0


def cmd_nscore(cfg):
    sample, pseudo = _load_sample(cfg)
    rho_n = latent_service.polyserial_mle(pseudo)
    scores = latent_service.gen_latent_scores(pseudo, rho_n=rho_n, seed=cfg.seed)
    pairs = latent_service.normal_score_pairs(scores, pseudo)
    summary = latent_service.normal_score_report(scores, pseudo)

    if cfg.emit == 'svg':
        report_service.write_frame(pairs, report_service.sibling(cfg.output, '', '.csv'))
        svg_path = report_service.sibling(cfg.output, '', '.svg')
        report_service.write_scatter_svg(pairs['z'], pairs['ny'], svg_path, 'latent normal score', 'normal score of y',
                                         seed=cfg.seed)
    else:
        report_service.write_frame(pairs, cfg.output, cfg.emit)
    print(f"n={summary['n']} rho_N={summary['rho_n']:.4f} pearson(z, ny)={summary['pearson']:.4f} seed={cfg.seed}")
    return 0


def cmd_fit(cfg):
    sample, pseudo = _load_sample(cfg)
    if cfg.summary:
        print(report_service.text_table(sample_service.conditional_summary(sample, cfg.y_col)))

    outcome = fit_service.compare_families(_families(cfg), pseudo, cfg.criterion, cfg.jobs)
    for failure in outcome['failures']:
        print(f"  {failure['family']}: failed ({failure['error']})")
    if not outcome['success']:
        raise SelectionError(outcome['error'])

    rows = [{'rank': i + 1, **r.to_dict(), 'theta': ' '.join(f'{t:.6g}' for t in r.spec.theta),
             'nonparametric': False}
            for i, r in enumerate(outcome['results'])]
    if cfg.beta:
        fit_service.fit_beta_copula(pseudo, seed=cfg.seed, seeds=cfg.beta_seeds)
        rows.append({'rank': None, 'family': 'empirical-beta', 'rotation': 'none', 'theta': '',
                     'loglik': None, 'aic': None, 'bic': None, 'n': sample.n, 'nonparametric': True})
    table = pd.DataFrame(rows)
    print(report_service.text_table(table))
    if cfg.output:
        report_service.write_frame(table, cfg.output, 'json' if cfg.emit == 'json' else 'csv')
    return 0


def cmd_qq(cfg):
    sample, pseudo = _load_sample(cfg)
    if cfg.beta:
        estimate = fit_service.fit_beta_copula(pseudo, seed=cfg.seed, seeds=cfg.beta_seeds)
        name = 'empirical beta copula'
    else:
        best = fit_service.select_model(_families(cfg), pseudo, cfg.criterion)[0]
        estimate, name = best.spec, best.spec.family.name

    panels = diagnose_service.qq_panels(estimate, sample, pseudo)
    print(f"Conditional Q-Q panels under {name}:")
    for panel in panels:
        path = report_service.sibling(cfg.output, f'_{panel.category}', '.svg' if cfg.emit == 'svg' else None)
        if cfg.emit == 'svg':
            report_service.write_scatter_svg(panel.model_q, panel.empirical_q, path, 'model quantile',
                                             'sorted observations', f'category {panel.label}',
                                             diagonal=True, seed=cfg.seed)
        else:
            report_service.write_frame(panel.to_frame(), path, cfg.emit)
        print(f"  category {panel.label}: n_j={panel.size}, discrepancy={panel.discrepancy:.4f} -> {path}")
    return 0


def cmd_kl_table(cfg):
    rows = kl_service.reproduce_tables(cfg.which, strict=cfg.strict or None, mode=cfg.mode, n_jobs=cfg.jobs)
    table = pd.DataFrame(rows)
    report_service.write_frame(table, cfg.output, 'json' if cfg.emit == 'json' else 'csv')
    columns = [c for c in ('case', 'reported_family', 'reported_kl', 'best_family', 'best_kl', 'named_kl',
                           'quality', 'within_tolerance', 'reproduced', 'interpretation', 'error')
               if c in table.columns]
    text = report_service.text_table(table[columns])
    report_service.write_text(text, report_service.sibling(cfg.output, '', '.txt'))
    print(text)
    hard = [r['case'] for r in rows if not r['success'] and not r.get('skipped')]
    if hard:
        logger.error(f"Rows failed: {hard}")
        return NumericalError.exit_code
    return 0


def cmd_automobile_demo(cfg):
    result = automobile_service.run_demo(cfg.output, cfg.input, list(cfg.family) or None, cfg.criterion, cfg.emit)
    print(f"Auto MPG records: {result['n']}")
    print(report_service.text_table(result['spearman']))
    print(report_service.text_table(result['summaries']))
    for ordinal, outcome in result['pairs'].items():
        if outcome['success']:
            print(f"weight/{ordinal}: best {outcome['best_by_criterion']} theta={outcome['theta']}, "
                  f"largest loglik {outcome['best_by_loglik']}")
        else:
            print(f"weight/{ordinal}: failed ({outcome['error']})")
    return 0 if result['success'] else NumericalError.exit_code


COMMAND_HANDLERS = {
    'simulate': cmd_simulate,
    'nscore': cmd_nscore,
    'fit': cmd_fit,
    'qq': cmd_qq,
    'kl-table': cmd_kl_table,
    'automobile-demo': cmd_automobile_demo,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=(args.log_level or config.LOG_LEVEL).upper(),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        cfg, _ = load_run_config(args)
        return COMMAND_HANDLERS[cfg.command](cfg)
    except ValidationError as e:
        logger.error(f"{args.command}: {str(e)}")
        return e.exit_code
    except NumericalError as e:
        logger.error(f"{args.command}: numerical failure: {str(e)}")
        return e.exit_code
    except OrdcopError as e:
        logger.error(f"{args.command}: {str(e)}")
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())

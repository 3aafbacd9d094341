# app.py
import os
import sys
import logging
import argparse

import config
from config import load_run_config
from errors import ConfigError, ScribeFlowError
from services import (
    CorpusService, SynthService, segmentation_service, metrics_service, learning_service,
    analysis_engine, storage_service, plot_service
)

logger = logging.getLogger(__name__)

# RunConfig field -> argparse dest for the shared flags
CONFIG_FLAGS = {
    'manifest_path': 'manifest',
    'inventory_path': 'inventory',
    'segment_size': 'segment_size',
    'top_k': 'top_k',
    'pca_dims': 'pca_dims',
    'embed_method': 'method',
    'nu': 'nu',
    'gamma': 'gamma',
    'n_trees': 'trees',
    'min_segments': 'min_segments',
    'seed': 'seed',
    'output_dir': 'out',
    'jobs': 'jobs',
}


# ===== ARGUMENT PARSING =====
def _merge_pair(text):
    source, sep, target = text.partition('=')
    if not sep or not source or not target:
        raise argparse.ArgumentTypeError(f'expected FROM=TO, got {text!r}')
    return source, target


def _shared_flags():
    """Flags accepted by every subcommand; None means 'not given' so the config file value survives"""
    shared = argparse.ArgumentParser(add_help=False)
    group = shared.add_argument_group('run configuration')
    group.add_argument('--config', help='JSON file with RunConfig values (flags win)')
    group.add_argument('--manifest', help='corpus manifest (JSON list of units)')
    group.add_argument('--inventory', help='brevigraph inventory JSON')
    group.add_argument('--segment-size', type=int, help=f'clusters per segment (default {config.SEGMENT_SIZE})')
    group.add_argument('--top-k', type=int, help=f'bigram vocabulary size (default {config.TOP_K})')
    group.add_argument('--pca-dims', type=int, help=f'PCA components (default {config.PCA_DIMS})')
    group.add_argument('--method', choices=config.EMBED_METHODS, help=f'2-D embedding (default {config.EMBED_METHOD})')
    group.add_argument('--nu', type=float, help=f'one-class SVM nu (default {config.NU})')
    group.add_argument('--gamma', help="RBF gamma, a number or 'scale' (default scale)")
    group.add_argument('--trees', type=int, help=f'random forest size (default {config.N_TREES})')
    group.add_argument('--min-segments', type=int, help=f'per-scribe minimum for scatterplots (default {config.MIN_SEGMENTS})')
    group.add_argument('--seed', type=int, help=f'master seed (default {config.SEED})')
    group.add_argument('--out', help=f'output directory (default {config.OUTPUT_DIR})')
    group.add_argument('--jobs', type=int, help='parallel workers; results do not depend on it')
    group.add_argument('--merge', type=_merge_pair, action='append', default=[], metavar='FROM=TO',
                       help='relabel a scribe in reports, e.g. "gamma?=gamma"')
    verbosity = shared.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')
    return shared


def build_parser():
    shared = _shared_flags()
    parser = argparse.ArgumentParser(prog='scribeflow', description='Scribal profiling of diplomatic transcriptions')
    parser.add_argument('--version', action='version', version=f'{config.APP_NAME} {config.APP_VERSION}')
    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('stats', parents=[shared], help='per-scribe corpus statistics')

    density = commands.add_parser('density', parents=[shared], help='abbreviation densities')
    density.add_argument('--group-by', choices=('scribe', 'codex', 'unit', 'codex+unit'), default='scribe')
    density.add_argument('--level', choices=('character', 'word'), default='character')
    density.add_argument('--sample', choices=('segment', 'document'), default='segment')
    density.add_argument('--pooled', action='store_true', help='ratio of summed counts instead of mean of samples')
    density.add_argument('--scribe', help='restrict to one scribe')
    density.add_argument('--contrast', metavar='CODEX', help='compare one codex against the rest of --scribe')

    scatter = commands.add_parser('scatter', parents=[shared], help='2-D map of all qualifying scribes')
    scatter.add_argument('--exclude-codex', action='append', default=[], metavar='CODEX')

    pairwise = commands.add_parser('pairwise', parents=[shared], help='2-D map of two scribes')
    pairwise.add_argument('--scribes', nargs='+', required=True, metavar='LABEL')

    downsample = commands.add_parser('downsample', parents=[shared], help='2-D map of equal-size samples')
    downsample.add_argument('--labels', nargs='+', metavar='LABEL')
    downsample.add_argument('--n-per-scribe', type=int)

    outliers = commands.add_parser('outliers', parents=[shared], help='leave-one-unit-out one-class SVM')
    outliers.add_argument('--scribe', required=True)
    outliers.add_argument('--aggregate-by', choices=('codex', 'unit'), default='codex')

    importance = commands.add_parser('importance', parents=[shared], help='random forest MDI contrast')
    importance.add_argument('--scribe')
    importance.add_argument('--target', required=True, metavar='CODEX')
    importance.add_argument('--unit', help='target production unit inside CODEX (default: whole codex)')
    importance.add_argument('--top-m', type=int, default=config.TOP_M)
    importance.add_argument('--save-model', action='store_true', help='also write the forest as JSON')

    attribute = commands.add_parser('attribute', parents=[shared], help='nearest-neighbour attribution')
    attribute.add_argument('--query', required=True)
    attribute.add_argument('--references', nargs='+', required=True)
    attribute.add_argument('--k', type=int, default=config.KNN_K)

    synth = commands.add_parser('synth', parents=[shared], help='write a synthetic corpus and manifest')
    source = synth.add_mutually_exclusive_group()
    source.add_argument('--plan', help='corpus plan JSON (default: the bundled two-scribe demo)')
    source.add_argument('--profile', metavar='PATH', help='one habit profile JSON; writes --n-units units of it')
    synth.add_argument('--n-units', type=int, default=3)
    synth.add_argument('--n-clusters', type=int, default=50100, help='clusters per unit with --profile')
    return parser


def configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=config.LOG_FORMAT, stream=sys.stderr, force=True)


# ===== SHARED HELPERS =====
def _run_config(args):
    overrides = {field: getattr(args, dest) for field, dest in CONFIG_FLAGS.items()}
    if args.merge:
        overrides['merge'] = dict(args.merge)
    return load_run_config(args.config, overrides)


def _corpus_service(cfg):
    corpus = CorpusService()
    if cfg.inventory_path:
        corpus.use_inventory(corpus.load_inventory(cfg.inventory_path))
    return corpus


def _load_units(cfg):
    if not cfg.manifest_path:
        raise ConfigError('--manifest (or manifest_path in --config) is required')
    corpus = _corpus_service(cfg)
    units = corpus.load_corpus(corpus.load_manifest(cfg.manifest_path))
    return corpus.merge_labels(units, cfg.merge)


def _load_segments(cfg):
    return segmentation_service.segment_corpus(_load_units(cfg), cfg.segment_size)


def _report_config(cfg):
    """Run settings recorded in reports; output location and worker count do not affect results"""
    return {k: v for k, v in cfg.to_dict().items() if k not in ('output_dir', 'jobs')}


def _save_reports(cfg, name, frame, payload, svg=None):
    paths = [storage_service.save_table(frame, f'{name}.csv', cfg.output_dir),
             storage_service.save_json(payload, f'{name}.json', cfg.output_dir)]
    if svg is not None:
        paths.append(storage_service.save_svg(svg, f'{name}.svg', cfg.output_dir))
    return paths


def _save_embedding(cfg, name, embedding, title):
    _save_reports(cfg, name, embedding.to_frame(), {'config': _report_config(cfg), **embedding.to_dict()},
                  plot_service.scatter(embedding, title))
    scribes = ', '.join(embedding.to_dict()['scribes'])
    return f'{name}: {len(embedding.labels)} segments from {scribes} ({embedding.method}) -> {cfg.output_dir}'


# ===== COMMANDS =====
def cmd_stats(cfg, args):
    units = _load_units(cfg)
    table = metrics_service.corpus_statistics(units, cfg.segment_size)
    _save_reports(cfg, 'stats', table, {'config': _report_config(cfg), 'scribes': table.to_dict(orient='records')})
    storage_service.save_table(metrics_service.codex_statistics(units), 'stats_codices.csv', cfg.output_dir)
    return f'stats: {len(table)} scribes, {len(units)} production units -> {cfg.output_dir}'


def cmd_density(cfg, args):
    units = _load_units(cfg)
    if args.scribe:
        units = [u for u in units if u.scribe == args.scribe]
    if args.contrast:
        if not args.scribe:
            raise ConfigError('--contrast needs --scribe')
        report = metrics_service.contrast_report(units, args.scribe, args.contrast, args.level, cfg.segment_size)
    else:
        report = metrics_service.density_report(units, group_by=args.group_by, level=args.level, sample=args.sample,
                                                segment_size=cfg.segment_size, pooled=args.pooled)
    _save_reports(cfg, 'density', report.to_frame(), {'config': _report_config(cfg), **report.to_dict()},
                  plot_service.density_boxplot(report))
    means = ', '.join(
        f'{row.key}={row.mean_density_char if report.level == "character" else row.mean_density_word:.3f}'
        for row in report.rows
    )
    return f'density ({report.level}, by {report.group_key}): {means}'


def cmd_scatter(cfg, args):
    embedding = analysis_engine.scatter_analysis(
        _load_segments(cfg), min_segments=cfg.min_segments, pca_k=cfg.pca_dims, method=cfg.embed_method,
        seed=cfg.seed, top_k=cfg.top_k, exclude_codices=args.exclude_codex)
    return _save_embedding(cfg, 'scatter', embedding, 'all scribes')


def cmd_pairwise(cfg, args):
    embedding = analysis_engine.pairwise_scatter(
        _load_segments(cfg), args.scribes, min_segments=cfg.min_segments, pca_k=cfg.pca_dims,
        method=cfg.embed_method, seed=cfg.seed, top_k=cfg.top_k)
    return _save_embedding(cfg, 'pairwise', embedding, ' vs '.join(args.scribes))


def cmd_downsample(cfg, args):
    embedding = analysis_engine.downsampled_scatter(
        _load_segments(cfg), labels=args.labels, n_per_scribe=args.n_per_scribe, seed=cfg.seed,
        pca_k=cfg.pca_dims, method=cfg.embed_method, top_k=cfg.top_k)
    return _save_embedding(cfg, 'downsample', embedding, 'equal-size samples')


def cmd_outliers(cfg, args):
    report = analysis_engine.loo_outlier_analysis(
        _load_segments(cfg), args.scribe, nu=cfg.nu, gamma=cfg.gamma, aggregate_by=args.aggregate_by,
        top_k=cfg.top_k, seed=cfg.seed, jobs=cfg.jobs)
    _save_reports(cfg, 'outliers', report.to_frame(), {'config': _report_config(cfg), **report.to_dict()},
                  plot_service.outlier_bars(report))
    worst = max(report.rows, key=lambda r: r.outlier_fraction)
    return (f'outliers for {report.scribe}: {len(report.unit_rows)} units, '
            f'highest outlier fraction {worst.outlier_fraction:.2f} in {worst.codex_id}')


def cmd_importance(cfg, args):
    report = analysis_engine.importance_analysis(
        _load_segments(cfg), args.target, target_unit=args.unit, scribe=args.scribe, n_trees=cfg.n_trees,
        seed=cfg.seed, top_m=args.top_m, top_k=cfg.top_k, jobs=cfg.jobs)
    _save_reports(cfg, 'importance', report.to_frame(), {'config': _report_config(cfg), **report.to_dict()},
                  plot_service.importance_boxplot(report))
    if args.save_model:
        storage_service.save_model(learning_service.model_to_json(report.forest), 'importance_model.json',
                                   cfg.output_dir)
    top = ', '.join(f.bigram.label for f in report.top())
    return f'importance for {report.target[0]} / {report.target[1]}: {top}'


def cmd_attribute(cfg, args):
    report = analysis_engine.attribute_segments(_load_segments(cfg), args.query, args.references, k=args.k,
                                                top_k=cfg.top_k)
    _save_reports(cfg, 'attribute', report.to_frame(), {'config': _report_config(cfg), **report.to_dict()})
    return f'attribute {report.query}: {report.verdict} ({report.agreement:.0%} of {len(report.rows)} segments)'


def cmd_synth(cfg, args):
    synth = SynthService(_corpus_service(cfg))
    if args.profile:
        profile = synth.load_profile(args.profile)
        docs = synth.profile_corpus(profile, args.n_units, args.n_clusters, cfg.output_dir, storage_service)
    else:
        plan = args.plan or os.path.join(config.DATA_DIR, 'demo_corpus.json')
        docs = synth.generate_corpus(plan, cfg.output_dir, storage_service)
    return f'synth: {len(docs)} units -> {os.path.join(cfg.output_dir, "manifest.json")}'


COMMANDS = {
    'stats': cmd_stats,
    'density': cmd_density,
    'scatter': cmd_scatter,
    'pairwise': cmd_pairwise,
    'downsample': cmd_downsample,
    'outliers': cmd_outliers,
    'importance': cmd_importance,
    'attribute': cmd_attribute,
    'synth': cmd_synth,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        cfg = _run_config(args)
        summary = COMMANDS[args.command](cfg, args)
    except ScribeFlowError as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        print(f'error: {type(e).__name__}: {e}', file=sys.stderr)
        return e.exit_code
    print(summary)
    return 0


if __name__ == '__main__':
    sys.exit(main())

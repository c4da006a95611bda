"""
Toolkit facade: runs the extraction, testing, forecasting and attribution
pipelines behind the command-line interface and writes their outputs.
"""
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from .config.config import Config, derive_seed
from .errors import DomainError, UsageError
from .services.curve_core import QuotePanel, curve_yields, fit_zero_coupon_curve, forward_at
from .services.data_io import (
    FeaturePanel, align, load_groups, load_macro, load_yields, write_frame, write_groups, write_json_report,
    write_macro, write_ufr_series, write_yields,
)
from .services.forecast_harness import (
    build_dataset, evaluate_run, forecast_runs, rolling_forecast, summarise_runs, window_length, yield_column,
)
from .services.interpret import attribution_frame, explain_instances, group_aggregate, rank_features
from .services.learners import Dataset, build_model, resolve_spec
from .services.stats_tests import correlation_table, unit_root_table
from .services.synthetic import SynthConfig, synth_generate
from .services.ufr_extract import METHODS, UfrSeries, ZjwConfig, calibrate_lambda, extract_all, extract_series
from .services.yield_forecast import evaluate_curve_forecasts

logger = logging.getLogger(__name__)

UFR_TARGET = 'ufr'


class UfrToolkit:
    """Pipelines for every command, sharing one configuration and root seed."""

    def __init__(self, config: Optional[Config] = None, seed: Optional[int] = None,
                 output_dir: Optional[str] = None):
        """
        Initializes UfrToolkit.

        Args:
            config: Loaded configuration, defaults when None
            seed: Root seed from the command line
            output_dir: Directory receiving every output file
        """
        self.config = config or Config()
        self.seed = self.config.resolve_seed(seed)
        self.output_dir = output_dir or self.config.OUTPUT_DIR
        logger.info(f"Toolkit ready: seed={self.seed}, output={self.output_dir}")

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _zjw_config(self) -> ZjwConfig:
        return ZjwConfig(**self.config.get_zjw_config())

    # Inputs

    def load_inputs(self, yields_path: str, macro_path: Optional[str] = None,
                    groups_path: Optional[str] = None) -> Tuple[QuotePanel, Optional[FeaturePanel]]:
        """Loads the yields file and, when given, the macro panel, aligned on common dates."""
        panel = load_yields(yields_path)
        if macro_path is None:
            return panel, None
        if groups_path is None:
            raise UsageError("--macro needs --groups")
        macro = load_macro(macro_path, load_groups(groups_path))
        return align(panel, macro)

    def generate_synthetic(self) -> Dict[str, str]:
        """Writes a synthetic yields, macro, groups and ground-truth set."""
        data = synth_generate(SynthConfig(**self.config.get_synth_config()), self.seed)
        return {
            'yields': write_yields(data.panel, self._path('yields.csv')),
            'macro': write_macro(data.macro, self._path('macro.csv')),
            'groups': write_groups(data.macro.groups, self._path('groups.csv')),
            'truth': write_ufr_series(data.truth, self._path('ufr_truth.csv')),
        }

    # Extraction

    def ufr_series(self, panel: QuotePanel, method: str) -> UfrSeries:
        return extract_series(panel, method, self._zjw_config(), self.config.ALPHA, self.config.ALPHA_BAR)

    def extract_ufr(self, panel: QuotePanel, method: str, calibrate: bool = False) -> Dict[str, str]:
        """
        Extracts one UFR series, or all four side by side with method 'all'.

        Args:
            panel: Quote panel
            method: sdf, sfr, syc, zjw or all
            calibrate: Calibrate lambda before running ZJW

        Returns:
            Dict[str, str]: Output name to written path
        """
        method = method.upper()
        config = self._zjw_config()
        if calibrate:
            config = config.with_lambda(self._calibrate(panel).lambda_star)
        if method == 'ALL':
            series = extract_all(panel, config, self.config.ALPHA, self.config.ALPHA_BAR)
            frame = pd.DataFrame({name.lower(): s.ufr for name, s in series.items()}, index=panel.dates)
            frame['zjw_alpha'] = series['ZJW'].alpha_path
            return {'ufr': write_frame(frame, self._path('ufr_all.csv'))}
        if method not in METHODS:
            raise UsageError(f"Unknown method {method.lower()}; choose from sdf, sfr, syc, zjw, all")

        series = extract_series(panel, method, config, self.config.ALPHA, self.config.ALPHA_BAR)
        outputs = {'ufr': write_ufr_series(series, self._path(f"ufr_{method.lower()}.csv"))}
        if series.alpha_path is not None:
            alpha = pd.DataFrame({'alpha': series.alpha_path,
                                  'flagged': [date in series.flagged for date in series.dates]}, index=series.dates)
            outputs['alpha'] = write_frame(alpha, self._path(f"alpha_{method.lower()}.csv"))
        return outputs

    def _calibrate(self, panel: QuotePanel):
        return calibrate_lambda(panel, self._zjw_config(), alpha=self.config.ALPHA, alpha_bar=self.config.ALPHA_BAR,
                                **self.config.get_calibration_config())

    def calibrate(self, panel: QuotePanel) -> Dict[str, str]:
        """Writes lambda* with its search flags and the objective on the grid."""
        result = self._calibrate(panel)
        grid = pd.DataFrame({'lambda': result.grid, 'objective': result.objective})
        grid.to_csv(self._ensure(self._path('lambda_grid.csv')), index=False, lineterminator='\n')
        report = {'lambda_star': result.lambda_star, 'objective_star': result.objective_star,
                  'refined': result.refined, 'degenerate': result.degenerate}
        return {'grid': self._path('lambda_grid.csv'),
                'report': write_json_report(report, self._path('lambda.json'))}

    def _ensure(self, path: str) -> str:
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        return path

    # Statistics

    def run_stats(self, panel: QuotePanel, method: str = 'sdf') -> Dict[str, str]:
        """Unit-root and correlation tables for the UFR and every yield."""
        levels = self._level_frame(panel, method)
        roots = unit_root_table({name: levels[name] for name in levels.columns})
        roots.to_csv(self._ensure(self._path('unit_root.csv')), index=False, lineterminator='\n')
        correlations = correlation_table(levels.dropna())
        correlations.index.name = 'series'
        correlations.to_csv(self._path('correlation.csv'), lineterminator='\n')
        return {'unit_root': self._path('unit_root.csv'), 'correlation': self._path('correlation.csv')}

    def _level_frame(self, panel: QuotePanel, method: str) -> pd.DataFrame:
        series = self.ufr_series(panel, method)
        frame = pd.DataFrame({UFR_TARGET: series.ufr}, index=panel.dates)
        for maturity in panel.grid.maturities:
            frame[yield_column(maturity)] = panel.yields[maturity].to_numpy()
        return frame

    # Forecasting

    def _target(self, name: str, panel: QuotePanel, series: Optional[UfrSeries]) -> pd.Series:
        if name == UFR_TARGET:
            return pd.Series(series.ufr, index=series.dates, name=UFR_TARGET)
        columns = {yield_column(u): u for u in panel.grid.maturities}
        if name not in columns:
            raise UsageError(f"Unknown target {name}; choose ufr or one of {', '.join(columns)}")
        return panel.yields[columns[name]].rename(name)

    def datasets(self, panel: QuotePanel, macro: Optional[FeaturePanel], targets: Sequence[str],
                 method: str, feature_set: str) -> Tuple[Dict[str, Dataset], Optional[UfrSeries]]:
        """Builds one dataset per target and checks each leaves an out-of-sample period."""
        series = self.ufr_series(panel, method) if UFR_TARGET in targets else None
        result = {}
        for target in targets:
            try:
                ds = build_dataset(self._target(target, panel, series), panel, macro, feature_set)
                window_length(len(ds), self.config.WINDOW_FRAC)
            except DomainError as e:
                raise UsageError(f"{target}: {e}") from e
            result[target] = ds
        return result, series

    def forecast(self, panel: QuotePanel, macro: Optional[FeaturePanel], models: Sequence[str],
                 targets: Sequence[str], method: str = 'sdf', feature_set: str = 'yields_only') -> Dict[str, str]:
        """
        Rolling forecasts of every target with every model preset.

        Args:
            panel: Quote panel
            macro: Macro panel, needed for yields_plus_macro
            models: Preset names
            targets: 'ufr' and/or yield columns such as y30
            method: Extraction method of the UFR target
            feature_set: yields_only or yields_plus_macro

        Returns:
            Dict[str, str]: Output name to written path
        """
        for name in models:
            resolve_spec(name)
        datasets, _ = self.datasets(panel, macro, targets, method, feature_set)
        rolling = self.config.get_rolling_config()
        runs = forecast_runs(datasets, models, self.seed, rolling['window_frac'], self.config.get_mlp_defaults(),
                             horizon=rolling['horizon'])
        outputs = {}
        for (target, model_name), run in runs.items():
            key = f"forecast_{model_name}_{target}"
            outputs[key] = write_frame(run.to_frame(), self._path(f"{key}.csv"))

        table = summarise_runs(runs)
        table.to_csv(self._path('forecast_table.csv'), index=False, lineterminator='\n')
        results: Dict[str, Dict[str, Any]] = {}
        for (target, model_name), run in runs.items():
            results.setdefault(target, {})[model_name] = evaluate_run(run).to_dict()
        report = {'method': method.upper(), 'feature_set': feature_set, 'seed': self.seed,
                  'window_frac': self.config.WINDOW_FRAC, 'results': results}
        outputs['table'] = self._path('forecast_table.csv')
        outputs['report'] = write_json_report(report, self._path('forecast_report.json'))
        return outputs

    def curve_forecast(self, panel: QuotePanel, macro: Optional[FeaturePanel], model: str,
                       method: str = 'zjw', feature_set: str = 'yields_only') -> Dict[str, str]:
        """Yield forecasts at every grid maturity driven by a forecast UFR change."""
        datasets, series = self.datasets(panel, macro, [UFR_TARGET], method, feature_set)
        ds = datasets[UFR_TARGET]
        spec = resolve_spec(model, derive_seed(self.seed, 'model', model, UFR_TARGET))
        run = rolling_forecast(ds, build_model(spec, ds.groups, self.config.get_mlp_defaults()),
                               **self.config.get_rolling_config())
        result = evaluate_curve_forecasts(panel, series, run, self.config.ALPHA)
        report = dict(result.report, model=model, feature_set=feature_set, ufr=evaluate_run(run).to_dict())
        frame = pd.concat({'predicted': result.predictions, 'benchmark': result.benchmark,
                           'actual': result.actuals}, axis=1)
        frame.columns = [f"{kind}_{column}" for kind, column in frame.columns]
        return {
            'yields': write_frame(frame, self._path('curve_forecast.csv')),
            'report': write_json_report(report, self._path('curve_forecast.json')),
        }

    # Attribution

    def explain(self, panel: QuotePanel, macro: Optional[FeaturePanel], model: str, target: str = UFR_TARGET,
                method: str = 'sdf', feature_set: str = 'yields_plus_macro', instances: int = 20,
                n_perms: Optional[int] = None) -> Dict[str, str]:
        """
        Shapley attributions of a model fitted on the first training window.

        The model sees standardised features and target as in the rolling
        harness; the following out-of-sample rows are explained against the
        training rows as background, so values are in target standard deviations.
        """
        if instances < 1:
            raise UsageError("--instances must be at least 1")
        datasets, _ = self.datasets(panel, macro, [target], method, feature_set)
        ds = datasets[target]
        w = window_length(len(ds), self.config.WINDOW_FRAC)
        X = ds.X.to_numpy(dtype=float)
        y = ds.y.to_numpy(dtype=float)
        scaler = StandardScaler().fit(X[:w])
        background = scaler.transform(X[:w])
        spread = float(y[:w].std()) or 1.0
        spec = resolve_spec(model, derive_seed(self.seed, 'model', model, target))
        estimator = build_model(spec, ds.groups, self.config.get_mlp_defaults())
        estimator.fit(background, (y[:w] - y[:w].mean()) / spread)

        rows = slice(w, min(len(ds), w + instances))
        attrs = explain_instances(estimator, background, scaler.transform(X[rows]),
                                  n_perms or self.config.SHAP_PERMUTATIONS, derive_seed(self.seed, 'explain', target))
        names = ds.feature_names
        mapping = dict(zip(names, ds.groups))
        values = attribution_frame(attrs, names, pd.DatetimeIndex(ds.y.index[rows], name='date'))
        ranking = rank_features(attrs, names).rename_axis('feature').reset_index()
        outputs = {
            'values': write_frame(values, self._path('shap_values.csv')),
            'report': write_json_report({'model': model, 'target': target, 'estimator': attrs[0].method,
                                         'instances': len(attrs), 'feature_set': feature_set},
                                        self._path('explain.json')),
        }
        ranking.to_csv(self._path('shap_ranking.csv'), index=False, lineterminator='\n')
        outputs['ranking'] = self._path('shap_ranking.csv')
        for mode in ('abs', 'signed'):
            table = group_aggregate(attrs, names, mapping, mode)
            table.to_csv(self._path(f"shap_groups_{mode}.csv"), lineterminator='\n')
            outputs[f"groups_{mode}"] = self._path(f"shap_groups_{mode}.csv")
        return outputs

    # Plot data

    def curve_data(self, panel: QuotePanel, method: str = 'zjw', dates: Optional[List[str]] = None,
                   max_tau: float = 100.0, step: float = 0.5) -> Dict[str, str]:
        """Fitted and extrapolated yield and forward curves on chosen dates."""
        if max_tau <= step or step <= 0:
            raise UsageError("--max-tau must exceed the step")
        series = self.ufr_series(panel, method)
        chosen = [panel.dates[-1]] if not dates else [pd.Timestamp(d) for d in dates]
        taus = np.round(np.arange(step, max_tau + step / 2, step), 10)
        frames = []
        for date in chosen:
            if date not in panel.dates:
                raise UsageError(f"Date {date:%Y-%m-%d} is not in the yields file")
            position = panel.dates.get_loc(date)
            f_inf = series.f_inf[position]
            if not np.isfinite(f_inf):
                raise DomainError(f"No UFR estimate on {date:%Y-%m-%d}")
            alpha = self.config.ALPHA
            if series.alpha_path is not None and np.isfinite(series.alpha_path[position]):
                alpha = float(series.alpha_path[position])
            curve = fit_zero_coupon_curve(panel.yields.iloc[position].to_numpy(), panel.grid, alpha, f_inf)
            frames.append(pd.DataFrame({'date': date.strftime('%Y-%m-%d'), 'tau': taus,
                                        'yield': curve_yields(curve, taus), 'forward': forward_at(curve, taus),
                                        'ufr': curve.ufr}))
        frame = pd.concat(frames, ignore_index=True)
        frame.to_csv(self._ensure(self._path('curve_data.csv')), index=False, lineterminator='\n')
        return {'curves': self._path('curve_data.csv')}

import logging
import math

logger = logging.getLogger(__name__)

def textual_preset_description(presets_to_include):
    output = ""
    fmt = " {name:14s} {layout:12s} {cov:34s} {descr}\n"
    output += fmt.format(name="Name", layout="Layout", cov="Covariance", descr="Description")
    for preset in presets_to_include:
        s = preset.spec
        layout = "{0:d} x {1:d}".format(s.n_locations, s.n_times)
        cov = "nu={0:g} a_s={1:g} a_t={2:g} beta={3:g}".format(s.nu, s.a_s, s.a_t, s.beta)
        output += fmt.format(name=preset.identifier, layout=layout, cov=cov, descr=preset.description)
    return output

def _fmt(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return "{0:.4f}".format(value)

def textual_report_description(reports):
    output = ""
    fmt = " {method:12s} {mspe:>10s} {se:>10s} {mpiw:>10s} {cov:>9s} {n:>7s} {wins:>5s}\n"
    output += fmt.format(method="Method", mspe="MSPE", se="SE", mpiw="MPIW", cov="COV", n="n", wins="wins")
    for report in reports:
        output += fmt.format(method=report.method, mspe=_fmt(report.mspe), se=_fmt(report.mspe_se),
                             mpiw=_fmt(report.mpiw), cov=_fmt(report.coverage), n=str(report.n_test),
                             wins="-" if report.wins is None else str(report.wins))
    return output

def log_fold_reports(report, level=logging.INFO):
    for fold in report.folds:
        logger.log(level, "  fold {fold:2d}: MSPE {mspe:.4f} on {n_test} points".format(**fold.to_dict()))

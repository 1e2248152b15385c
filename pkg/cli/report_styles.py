"""
Plain-text report layouts for the command line
"""

import math

RULE = '-' * 72

RECORD_COLUMNS = ('variant', 'N', 't*/pi', 'A*/pi', 'E*', 'F*', 'drift')
RECORD_ROW = "{:<14}{:>3}{:>10}{:>10}{:>10}{:>12}{:>11}"


def format_records_table(records) -> str:
    """Summary of synthesis records, one row per record"""
    lines = [RECORD_ROW.format(*RECORD_COLUMNS), RULE]
    for record in records:
        lines.append(RECORD_ROW.format(
            record.variant.value,
            record.order,
            f"{record.t_star / math.pi:.4f}",
            f"{record.area / math.pi:.4f}",
            f"{record.energy:.4f}",
            f"{record.fidelity:.2e}",
            f"{record.audit.max_drift:.1e}",
        ))
    return '\n'.join(lines)


def format_switches(record) -> str:
    if not record.switch_times:
        return ''
    return 'switches: ' + ', '.join(f"{s / math.pi:.6f} pi" for s in record.switch_times)


def format_profile_summary(profile, maxima: int) -> str:
    best = int(profile.fidelity.argmax())
    return (f"{profile.parameter} in [{profile.values[0]:g}, {profile.values[-1]:g}], "
            f"{len(profile.values)} points\n"
            f"min F = {profile.fidelity.min():.6f}, max F = {profile.fidelity[best]:.6f} "
            f"at {profile.parameter} = {profile.values[best]:.4f}\n"
            f"local maxima: {maxima}")


def format_scan_summary(scan) -> str:
    coords, fidelity = scan.best()
    where = ', '.join(f"{name} = {value:.4f}" for (name, _), value in zip(scan.axes, coords))
    return (f"{scan.failed.size} cells, {int(scan.failed.sum())} failed\n"
            f"best F* = {fidelity:.3e} at {where}")


def format_grape_summary(result, reference_fidelity=None, maxima=None) -> str:
    lines = [f"spins: {len(result.problem.offsets)}, duration: {result.problem.duration / math.pi:.4f} pi, "
             f"segments: {result.problem.samples}",
             f"GRAPE mean fidelity: {result.fidelity:.8f} after {result.iterations} iterations"]
    if reference_fidelity is not None:
        lines.append(f"reference mean fidelity: {reference_fidelity:.8f}")
    if maxima is not None:
        lines.append(f"profile local maxima (GRAPE / reference): {maxima[0]} / {maxima[1]}")
    return '\n'.join(lines)


def format_validation(report) -> str:
    lines = []
    for result in report.results:
        status = 'PASS' if result.passed else 'FAIL'
        lines.append(f"[{status}] {result.name:<24} {result.detail} ({result.seconds:.1f} s)")
    lines.append(RULE)
    lines.append('all criteria passed' if report.passed else 'some criteria failed')
    return '\n'.join(lines)

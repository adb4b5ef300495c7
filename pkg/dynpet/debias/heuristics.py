from ..forward import PositronKernel


def heuristic_q(geometry, p_s, p_d, total_mass, mode='discrete', kernel=None):
    """
    Rule of thumb for q: q times the scatter density of the true mass must dominate the
    detection density of a hallucinated point mass at every scattered event,

        q = max(1, p_d X / (p_s ||rho||) * H(Dd) / delta^2)

    with X the number of detector cells (discrete) or the kernel peak G(0) (continuous), and
    H(Dd) the measure of the detector surface (its perimeter in 2D).

    Parameters
    ----------
    geometry: ScannerGeometry
    p_s: float
        Scatter probability, must be positive
    p_d: float
        Direct detection probability
    total_mass: float
        Expected total mass of the ground truth
    mode: str
        'discrete' or 'continuous'
    kernel: PositronKernel, float or None
        Needed in continuous mode

    Returns
    -------
    q: float
    """
    assert mode in ('discrete', 'continuous'), "mode must be 'discrete' or 'continuous'"
    if not p_s > 0:
        raise ValueError('the heuristic needs a positive scatter probability')
    if not total_mass > 0:
        raise ValueError(f'total_mass must be positive, got {total_mass}')
    if mode == 'discrete':
        X = geometry.n_detectors
    else:
        if kernel is None or isinstance(kernel, (int, float)):
            kernel = PositronKernel(sigma=kernel, dim=geometry.dim)
        X = kernel.peak()
    ratio = p_d * X / (p_s * total_mass) * geometry.surface_measure / geometry.delta ** 2
    return float(max(1., ratio))

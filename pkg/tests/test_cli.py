import subprocess

import numpy as np
import pandas as pd
import pytest


@pytest.fixture
def images(tmp_path):
    from tvphi import two_region_phantom, add_gaussian_noise, write_pgm
    clean = two_region_phantom(32)
    write_pgm(clean, tmp_path / 'clean.pgm')
    write_pgm(add_gaussian_noise(clean, 30, seed=1), tmp_path / 'noisy.pgm')
    return tmp_path


def test_cli():

    # Test the CLI help command
    result = subprocess.run(['tvphi', '--help'], capture_output=True, text=True)
    assert result.returncode == 0
    assert 'usage:' in result.stdout


@pytest.mark.parametrize('command', ['denoise', 'sweep', 'fit', 'demo'])
def test_cli_subcommand_help(command):
    result = subprocess.run(['tvphi', command, '--help'], capture_output=True, text=True)
    assert result.returncode == 0
    assert 'usage:' in result.stdout


def test_usage_errors(images):
    from tvphi.cli import main

    assert main(['demo', '--name', 'bogus']) == 1
    assert main(['denoise', '--input', str(images / 'missing.pgm'), '--output', str(images / 'out.pgm')]) == 1
    assert main(['denoise', '--input', str(images / 'clean.pgm'), '--output', str(images / 'out.pgm'), '--M', '-3']) == 1


def test_demo(tmp_path, capsys):
    from tvphi.cli import main

    assert main(['demo', '--name', 'ramp', '--outdir', str(tmp_path)]) == 0
    assert (tmp_path / 'ramp.csv').exists()
    assert 'ramp: PASS' in capsys.readouterr().out


def test_denoise_identity(images):
    from tvphi import read_pgm
    from tvphi.cli import main

    out = images / 'out.pgm'
    assert main(['denoise', '--input', str(images / 'noisy.pgm'), '--output', str(out), '--alpha-inf', '0', '--eta0', '0']) == 0
    assert np.array_equal(read_pgm(out).data, read_pgm(images / 'noisy.pgm').data)


def test_denoise_with_noise(images, capsys):
    from tvphi.cli import main

    out = images / 'out.pgm'
    args = ['denoise', '--input', str(images / 'clean.pgm'), '--output', str(out), '--sigma', '30', '--seed', '3',
            '--ref', str(images / 'clean.pgm')]
    assert main(args) == 0
    assert 'PSNR=' in capsys.readouterr().out
    assert (images / 'out_noisy.pgm').exists()
    report = pd.read_csv(images / 'out_report.csv')
    assert list(report.columns) == ['iteration', 'gamma', 'step', 'cg_iters', 'objective', 'fidelity', 'regularizer', 'eta']

    # identical runs give identical files
    first = out.read_bytes(), (images / 'out_report.csv').read_bytes()
    assert main(args) == 0
    assert (out.read_bytes(), (images / 'out_report.csv').read_bytes()) == first


def test_denoise_cutoffs_and_presets(images):
    from tvphi.cli import main

    base = ['denoise', '--input', str(images / 'noisy.pgm'), '--output', str(images / 'out.pgm')]
    assert main(base + ['--M', 'inf']) == 0
    assert main(base + ['--M', '0']) == 0
    assert main(base + ['--preset', 'parrot', '--levels', '0']) == 0


def test_sweep(images):
    from tvphi.cli import main

    table_path = images / 'sweep.csv'
    args = ['sweep', '--input', str(images / 'noisy.pgm'), '--ref', str(images / 'clean.pgm'), '--Ms', '0,10,inf',
            '--sigma', '30', '--levels', '0', '--output', str(table_path)]
    assert main(args) == 0
    table = pd.read_csv(table_path, dtype={'M': str}, keep_default_na=False)
    assert table['M'].tolist() == ['0', '10', 'Inf']
    assert (table['PSNR_best'] == '*').sum() == 1
    assert (table['SSIM_best'] == '*').sum() == 1


def test_fit(images, capsys):
    from tvphi.cli import main

    power, free = images / 'power.csv', images / 'free.csv'
    noisy = str(images / 'noisy.pgm')
    assert main(['fit', '--input', noisy, '--fit-output', str(power), '--hist-output', str(images / 'h.csv')]) == 0
    assert 'q=' in capsys.readouterr().out
    assert main(['fit', '--input', noisy, '--model', 'linearized', '--M', 'free',
                 '--fit-output', str(free), '--hist-output', str(images / 'h.csv')]) == 0
    assert pd.read_csv(free)['residual'][0] <= pd.read_csv(power)['residual'][0]
    assert len(pd.read_csv(images / 'h.csv')) == 64

    # a constant image has no gradient spread to fit
    from tvphi import Image, write_pgm
    write_pgm(Image(np.full((16, 16), 100.0)), images / 'flat.pgm')
    assert main(['fit', '--input', str(images / 'flat.pgm'), '--fit-output', str(power),
                 '--hist-output', str(images / 'h.csv')]) == 2


@pytest.fixture
def phantom(tmp_path):
    from tvphi import two_region_phantom, write_pgm
    write_pgm(two_region_phantom(64), tmp_path / 'clean.pgm')
    return tmp_path


# σ = 30, seed 7, q = 0.5, M = 10, α^∞ = 0.0253, K = 0 on the 64×64 phantom
PHANTOM_PSNR = 34.1554
PROTOCOL = ['--sigma', '30', '--seed', '7', '--q', '0.5', '--alpha-inf', '0.0253', '--levels', '0']


def test_denoise_pinned(phantom, capsys):
    from tvphi.cli import main

    clean = str(phantom / 'clean.pgm')
    args = ['denoise', '--input', clean, '--output', str(phantom / 'out.pgm'), '--M', '10', '--ref', clean]
    assert main(args + PROTOCOL) == 0
    out = capsys.readouterr().out
    value = float(out.split('PSNR=')[1].split()[0])
    assert value == pytest.approx(PHANTOM_PSNR, abs=0.01)


def test_sweep_pinned(phantom):
    from tvphi.cli import main

    clean = str(phantom / 'clean.pgm')
    table_path = phantom / 'sweep.csv'
    args = ['sweep', '--input', clean, '--ref', clean, '--Ms', '0,10,inf', '--jobs', '3', '--output', str(table_path)]
    assert main(args + PROTOCOL) == 0
    table = pd.read_csv(table_path, dtype={'M': str}, keep_default_na=False)
    assert table.loc[table['M'] == '10', 'PSNR'].iloc[0] == pytest.approx(PHANTOM_PSNR, abs=0.01)
    # the pure power law does not give the best PSNR
    best = table.loc[table['PSNR_best'] == '*', 'M'].iloc[0]
    assert best != 'Inf'
    assert table['PSNR'].max() >= PHANTOM_PSNR - 0.01


def test_denoise_without_noise(images):
    from tvphi.cli import main

    out = images / 'out.pgm'
    args = ['denoise', '--input', str(images / 'noisy.pgm'), '--output', str(out), '--sigma', '0', '--levels', '0']
    assert main(args) == 0
    assert out.exists()
    assert (images / 'out_noisy.pgm').exists()
    assert main(args[:-4] + ['--sigma', '-1']) == 1

import logging
from pathlib import Path

from Cltci.datasets.synthetic import MANIFEST_NAME, generate_synthetic, separability

from ._base import ToolkitCommand

logger = logging.getLogger('Cltci')


class Command(ToolkitCommand):
    help = "Generate the synthetic longitudinal chest image dataset"
    kind = 'synth'

    def add_run_arguments(self, parser):
        parser.add_argument('--num-patients', type=int, help="Number of patients")
        parser.add_argument('--images-per-patient', type=int, help="Images per patient")
        parser.add_argument('--image-size', type=int, help="Side length of the square images")

    def overrides(self, options):
        return {
            'synthetic.num_patients': options.get('num_patients'),
            'synthetic.images_per_patient': options.get('images_per_patient'),
            'synthetic.image_size': options.get('image_size'),
        }

    def output_dir(self, cfg, options, digest):
        if options.get('out'):
            return Path(options['out'])
        return Path(cfg.paths.data_dir)

    def run(self, cfg, out_dir, run, options, num_workers):
        manifest = generate_synthetic(cfg.synthetic, out_dir)
        within, across = separability(manifest)
        logger.info(
            "%d images of %d patients; mean squared distance within %.5f, across %.5f",
            len(manifest), manifest.num_patients, within, across,
        )
        return out_dir / MANIFEST_NAME

import logging

from Cltci.datasets.records import load_manifest
from Cltci.evaluation.embeddings import (
    chance_purity,
    export_embeddings,
    patient_cluster_purity,
    similarity_gap,
    write_embeddings_csv,
)
from Cltci.evaluation.reports import plot_embeddings
from Cltci.networks.checkpoints import load_checkpoint

from ._base import ToolkitCommand

logger = logging.getLogger('Cltci')


class Command(ToolkitCommand):
    help = "Embed images with a pretrained encoder and score patient clustering"
    kind = 'eval'

    def add_run_arguments(self, parser):
        parser.add_argument('--checkpoint', help="Pretrained checkpoint")
        parser.add_argument('--manifest', help="Manifest of the images to embed")
        parser.add_argument('--k', type=int, help="Neighbours per point")
        parser.add_argument('--permutations', type=int, help="Label shuffles for the chance level")

    def overrides(self, options):
        return {
            'paths.checkpoint': options.get('checkpoint'),
            'paths.manifest': options.get('manifest'),
            'eval.k': options.get('k'),
            'eval.permutations': options.get('permutations'),
        }

    def run(self, cfg, out_dir, run, options, num_workers):
        if not cfg.paths.checkpoint:
            raise ValueError("No checkpoint given; pass --checkpoint or set paths.checkpoint")
        checkpoint = load_checkpoint(cfg.paths.checkpoint)
        run.variant = checkpoint.metadata.get('pretrain_variant', '')
        run.save(update_fields=['variant'])

        manifest = load_manifest(cfg.paths.pretrain_manifest_path)
        embeddings = export_embeddings(manifest, checkpoint, preprocess=cfg.preprocess)
        write_embeddings_csv(embeddings, out_dir / 'embeddings.csv')
        plot_embeddings(embeddings, out_dir / 'embeddings_2d.png', seed=cfg.seed)

        purity = patient_cluster_purity(embeddings, cfg.eval.k)
        chance = chance_purity(embeddings, cfg.eval.k, cfg.eval.permutations, seed=cfg.seed)
        within, across = similarity_gap(embeddings)
        logger.info(
            "Purity %.4f (chance %.4f); cosine similarity within %.4f, across %.4f",
            purity, chance, within, across,
        )
        return f'{purity:.6f}'

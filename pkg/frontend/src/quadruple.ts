import { z } from "zod";
import { RANKING_MAX, RANKING_MIN } from "./ranking.js";

// Exported annotations feed the asset-matching trainer; this schema is
// the client-side statement of that input contract, used to check that
// a round-tripped export is actually consumable.
export const quadrupleSchema = z
  .object({
    scene_id: z.string().min(1),
    object_id: z.string().min(1),
    candidates: z.array(z.string().min(1)).min(2),
    truth_index: z.number().int().nonnegative(),
    ranking: z.array(z.string().min(1)).min(RANKING_MIN).max(RANKING_MAX),
    caption: z.string(),
    image: z.string().nullable(),
    annotator_id: z.string(),
    timestamp: z.string(),
  })
  .superRefine((quad, ctx) => {
    if (quad.truth_index >= quad.candidates.length) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: `truth_index ${quad.truth_index} outside candidates`,
        path: ["truth_index"],
      });
    }
    if (new Set(quad.ranking).size !== quad.ranking.length) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: "ranking contains duplicates",
        path: ["ranking"],
      });
    }
    const truth = quad.candidates[quad.truth_index];
    if (truth !== undefined && quad.ranking.includes(truth)) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: "ranking contains the truth asset",
        path: ["ranking"],
      });
    }
    for (const id of quad.ranking) {
      if (!quad.candidates.includes(id)) {
        ctx.addIssue({
          code: z.ZodIssueCode.custom,
          message: `ranked id ${id} is not a candidate`,
          path: ["ranking"],
        });
      }
    }
  });

export type Quadruple = z.infer<typeof quadrupleSchema>;

export const trainingExportSchema = z.object({
  v: z.literal(1),
  quadruples: z.array(quadrupleSchema),
  unannotated: z.array(z.string()),
});

/** Parse a fetched training export; throws with the zod explanation if
 *  the payload would not load as matching-trainer input. */
export function importTrainingExport(payload: unknown) {
  return trainingExportSchema.parse(payload);
}

export class ModelUnavailableError extends Error {
  constructor(name: string) {
    super(
      `model unavailable: ${JSON.stringify(name)}; this environment has no ` +
        `downloaded encoder weights, use the "seeded" backend`,
    )
    this.name = 'ModelUnavailableError'
  }
}

export class UsageError extends Error {
  constructor(message: string) {
    super(message)
    this.name = 'UsageError'
  }
}
